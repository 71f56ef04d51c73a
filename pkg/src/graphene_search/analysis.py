"""Finite-size scaling studies and least-squares comparison of candidate scaling laws.

Every model is linear in its constants, so fits are plain least squares on
the raw values (no log transform), solved through the normal equations.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .dynamics import amplitudes, reduced_search_time, run_search
from .exceptions import LatticeError
from .lattice import LatticeSpec
from .resolvent import moment_sums, verify_moment_limit
from .search import DEFAULT_MARKED, build_search_hamiltonian, neighbor_state, optimal_start_state
from .spectral import eig_sym, gap_at_crossing

MIN_POINTS = 4

# model name -> (regressor columns as a function of N, constant names)
MODELS = {
    "c/sqrt(N)": (lambda N: [1.0 / np.sqrt(N)], ("c",)),
    "c/sqrt(N ln N)": (lambda N: [1.0 / np.sqrt(N * np.log(N))], ("c",)),
    "c ln N + b": (lambda N: [np.log(N), np.ones_like(N)], ("c", "b")),
    "c sqrt(N ln N)": (lambda N: [np.sqrt(N * np.log(N))], ("c",)),
    "c sqrt(N)": (lambda N: [np.sqrt(N)], ("c",)),
}


@dataclass(frozen=True)
class ScalingFit:
    model: str
    constants: dict
    rss: float
    r2: float
    n_points: int

    def to_dict(self) -> dict:
        return {"model": self.model, "constants": dict(self.constants), "rss": self.rss,
                "r2": self.r2, "n_points": self.n_points}


def _design(model, N):
    cols, _ = MODELS[model]
    return np.column_stack(cols(np.asarray(N, dtype=float)))


class ScalingLawRegressor(RegressorMixin, BaseEstimator):
    """Least-squares fit of ``y(N)`` to one of the named scaling laws.

    Parameters
    ----------
    model : str
        One of the keys of ``MODELS``.

    Attributes
    ----------
    coef_ : ndarray
        Fitted constants in the order of ``constant_names_``.
    rss_, r2_ : float
        Residual sum of squares and coefficient of determination (clipped to [0, 1]).
    """

    def __init__(self, model="c/sqrt(N ln N)"):
        self.model = model

    def fit(self, X, y):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; choose from {sorted(MODELS)}")
        X, y = check_X_y(X, y, ensure_min_samples=MIN_POINTS, y_numeric=True)
        if X.shape[1] != 1:
            raise ValueError("X must have a single column holding N")
        N = X[:, 0]
        if np.any(N <= 1):
            raise ValueError("N must exceed 1")
        G = _design(self.model, N)
        self.coef_ = np.linalg.solve(G.T @ G, G.T @ y)
        resid = y - G @ self.coef_
        self.rss_ = float(resid @ resid)
        tss = float(((y - y.mean()) ** 2).sum())
        self.r2_ = float(np.clip(1.0 - self.rss_ / tss, 0.0, 1.0)) if tss > 0 else 1.0
        self.constant_names_ = MODELS[self.model][1]
        self.n_features_in_ = 1
        self.n_samples_ = len(y)
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return _design(self.model, X[:, 0]) @ self.coef_

    @property
    def fit_(self) -> ScalingFit:
        check_is_fitted(self, "coef_")
        return ScalingFit(self.model, dict(zip(self.constant_names_, map(float, self.coef_))),
                          self.rss_, self.r2_, self.n_samples_)


def fit_scaling(N, y, model) -> ScalingFit:
    """Convenience wrapper returning a :class:`ScalingFit`."""
    N = np.asarray(N, dtype=float)
    return ScalingLawRegressor(model).fit(N.reshape(-1, 1), np.asarray(y, dtype=float)).fit_


def compare_models(N, y, models) -> tuple[dict[str, ScalingFit], str]:
    """Fit every model; the verdict is the one with the smallest residual."""
    fits = {m: fit_scaling(N, y, m) for m in models}
    return fits, min(fits, key=lambda m: fits[m].rss)


# -- studies ------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StudyResult:
    study: str
    rows: list[dict] = field(repr=False)
    fits: dict
    verdict: str | None = None
    extras: dict = field(default_factory=dict)

    def column(self, name) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def report(self) -> dict:
        return {
            "study": self.study,
            "sizes": [r["m"] for r in self.rows],
            "fits": {k: f.to_dict() for k, f in self.fits.items()},
            "verdict": self.verdict,
            **self.extras,
        }


def _check_sizes(sizes, need_dirac=True):
    sizes = [int(s) for s in sizes]
    if len(sizes) < MIN_POINTS:
        raise ValueError(f"need at least {MIN_POINTS} sizes, got {len(sizes)}")
    if need_dirac and any(s % 3 for s in sizes):
        raise LatticeError(f"sizes must be multiples of 3: {sizes}")
    return sorted(sizes)


def _map(fn, items, executor):
    return list(executor.map(fn, items)) if executor is not None else [fn(x) for x in items]


def _gap_row(m, marked):
    spec = LatticeSpec(m, m)
    g = gap_at_crossing(spec, marked)
    I2 = moment_sums(spec, 1)[0]
    N = spec.num_sites
    return {
        "m": m, "N": N, "E_plus": g.E_plus, "gap": g.gap,
        "gap_reduced": 4.0 * np.sqrt(3.0 / N),
        "gap_log_corrected": 2.0 * np.sqrt(4.0 * np.sqrt(3.0) / (N * I2)),
    }


def gap_scaling_study(sizes=range(6, 25, 3), marked=DEFAULT_MARKED, executor=None) -> StudyResult:
    """Gap at the crossing per size, fitted to ``c/sqrt(N)`` and ``c/sqrt(N ln N)``.

    ``extras['jackknife_shift']`` is the relative change of the log-corrected
    constant when the smallest size is dropped.
    """
    sizes = _check_sizes(sizes)
    rows = _map(lambda m: _gap_row(m, marked), sizes, executor)
    N = np.array([r["N"] for r in rows], dtype=float)
    gap = np.array([r["gap"] for r in rows])
    fits, verdict = compare_models(N, gap, ["c/sqrt(N)", "c/sqrt(N ln N)"])
    extras = {"monotone_decreasing": bool(np.all(np.diff(gap) < 0))}
    if len(sizes) > MIN_POINTS:
        c_all = fits["c/sqrt(N ln N)"].constants["c"]
        c_drop = fit_scaling(N[1:], gap[1:], "c/sqrt(N ln N)").constants["c"]
        extras["jackknife_shift"] = abs(c_drop - c_all) / abs(c_all)
    return StudyResult("gap", rows, fits, verdict, extras)


def _search_row(m, marked):
    spec = LatticeSpec(m, m)
    H = build_search_hamiltonian(spec, 1.0, marked)
    sp = eig_sym(H)
    run = run_search(spec, marked, spectrum=sp)
    ell_amp = amplitudes(sp, optimal_start_state(spec, marked), [run.T_peak],
                         neighbor_state(spec, marked)[:, None])[0, 0]
    I2 = moment_sums(spec, 1)[0]
    N = spec.num_sites
    lnN = np.log(N)
    predicted = 1.0 / (3.0 ** 0.25 * np.sqrt(I2))
    return {
        "m": m, "N": N, "E_plus": run.E_plus, "T_peak": run.T_peak, "P_peak": run.P_peak,
        "T_exact": run.T_exact, "T_reduced": reduced_search_time(spec),
        "T_peak_E_plus": run.T_peak * run.E_plus,
        "P_peak_lnN": run.P_peak * lnN, "T_peak_lnN": run.T_peak * lnN,
        "I2": I2, "ell_amplitude": float(abs(ell_amp)), "predicted_amplitude": predicted,
        "amplitude_ratio": float(abs(ell_amp)) / predicted,
    }


_TIME_COLUMNS = ("m", "N", "E_plus", "T_peak", "P_peak", "T_exact", "T_reduced",
                 "T_peak_E_plus", "P_peak_lnN", "T_peak_lnN")
_AMPLITUDE_COLUMNS = ("m", "N", "T_peak", "I2", "ell_amplitude", "predicted_amplitude", "amplitude_ratio")


def search_time_study(sizes=range(6, 25, 3), marked=DEFAULT_MARKED, executor=None) -> StudyResult:
    """Measured ``T_peak`` per size against ``pi/(2 E_+)``; fit of ``T_peak`` to ``c sqrt(N ln N)``.

    The ``c sqrt(N)`` fit is included for comparison; ``T_peak_lnN`` is the
    total time including ``O(ln N)`` repetitions, reported only.
    """
    sizes = _check_sizes(sizes)
    full = _map(lambda m: _search_row(m, marked), sizes, executor)
    rows = [{k: r[k] for k in _TIME_COLUMNS} for r in full]
    N = np.array([r["N"] for r in rows], dtype=float)
    T = np.array([r["T_peak"] for r in rows])
    fits, verdict = compare_models(N, T, ["c sqrt(N ln N)", "c sqrt(N)"])
    ratio = np.array([r["T_peak_E_plus"] for r in rows]) / (np.pi / 2.0)
    p_ln = np.array([r["P_peak_lnN"] for r in rows])
    extras = {
        "max_time_law_deviation": float(np.max(np.abs(ratio - 1.0))),
        "P_peak_lnN_drift": float((p_ln.max() - p_ln.min()) / p_ln.max()),
        "T_peak_increasing": bool(np.all(np.diff(T) > 0)),
    }
    return StudyResult("time", rows, fits, verdict, extras)


def amplitude_envelope_study(sizes=range(6, 25, 3), marked=DEFAULT_MARKED, executor=None) -> StudyResult:
    """``|<ell|psi(T_peak)>|`` per size against ``1/(3^(1/4) I_2^(1/2))``."""
    sizes = _check_sizes(sizes)
    full = _map(lambda m: _search_row(m, marked), sizes, executor)
    rows = [{k: r[k] for k in _AMPLITUDE_COLUMNS} for r in full]
    pred = np.array([r["predicted_amplitude"] for r in rows])
    ratio = np.array([r["amplitude_ratio"] for r in rows])
    extras = {
        "predicted_decreasing": bool(np.all(np.diff(pred) < 0)),
        "ratio_min": float(ratio.min()),
        "ratio_max": float(ratio.max()),
    }
    return StudyResult("amplitude", rows, {}, None, extras)


def moments_study(sizes=range(6, 31, 3), executor=None, cutoff=1000) -> StudyResult:
    """``I_2`` and ``I_4`` per size; ``I_2`` against ``c ln N + b``; large-N limit of ``I_4/N``."""
    sizes = _check_sizes(sizes)

    def row(m):
        spec = LatticeSpec(m, m)
        I2, I4 = moment_sums(spec, 2)
        return {"m": m, "N": spec.num_sites, "lnN": float(np.log(spec.num_sites)),
                "I2": float(I2), "I4": float(I4), "I4_over_N": float(I4 / spec.num_sites)}

    rows = _map(row, sizes, executor)
    N = np.array([r["N"] for r in rows], dtype=float)
    fit = fit_scaling(N, [r["I2"] for r in rows], "c ln N + b")
    limit = verify_moment_limit(sizes, k=2, cutoff=cutoff)
    extras = {
        "moment_limit": {
            "candidates": limit.candidates,
            "extrapolated": limit.extrapolated,
            "prefactor": limit.verdict,
            "monotone": limit.monotone,
        },
        "I2_increasing": bool(np.all(np.diff([r["I2"] for r in rows]) > 0)),
    }
    return StudyResult("moments", rows, {"I2": fit}, None, extras)


STUDIES = {
    "gap": gap_scaling_study,
    "time": search_time_study,
    "amplitude": amplitude_envelope_study,
    "moments": moments_study,
}
