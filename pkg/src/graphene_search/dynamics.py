"""Time evolution by spectral decomposition: search runs, resolvent amplitudes, state transfer."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bloch import SQRT3
from .exceptions import LatticeError, NumericalError
from .lattice import LatticeSpec, SiteId
from .resolvent import moment_sums, perturbed_energies, resolvent_dF
from .search import (
    DEFAULT_MARKED,
    SearchHamiltonian,
    _as_site,
    build_search_hamiltonian,
    neighbor_indices,
    neighbor_state,
    optimal_start_state,
    site_vector,
    uniform_dirac_state,
)
from .spectral import SpectrumResult, eig_sym, gap_at_crossing, smallest_positive_band_energy

NORM_TOL = 1e-10


def _spectrum(H, spectrum=None) -> SpectrumResult:
    return spectrum if spectrum is not None else eig_sym(H)


def _check_state(psi0):
    psi0 = np.asarray(psi0, dtype=complex)
    norm = np.linalg.norm(psi0)
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"initial state must be normalized (norm {norm!r})")
    return psi0


def _check_times(times):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1:
        raise ValueError("times must be one-dimensional")
    if np.any(np.diff(times) < 0):
        raise ValueError("times must be ascending")
    return times


def propagate(H, psi0, times, spectrum: SpectrumResult | None = None) -> np.ndarray:
    """``psi(t) = sum_a exp(-i E_a t) |a><a|psi0>`` for every ``t`` in ``times``.

    Returns
    -------
    ndarray, shape (len(times), N), complex
    """
    psi0 = _check_state(psi0)
    times = _check_times(times)
    sp = _spectrum(H, spectrum)
    V = sp.eigenvectors
    c = V.T @ psi0
    states = (np.exp(-1j * np.outer(times, sp.eigenvalues)) * c) @ V.T
    err = np.max(np.abs(np.linalg.norm(states, axis=1) - 1.0)) if len(times) else 0.0
    if err > NORM_TOL:
        raise NumericalError(f"norm drift {err:.3e} exceeds {NORM_TOL}")
    return states


def amplitudes(spectrum: SpectrumResult, psi0, times, probes) -> np.ndarray:
    """``<probe_j|psi(t)>`` without building the full states.

    ``probes`` is an ``(N, P)`` array of (real or complex) probe vectors.
    """
    V = spectrum.eigenvectors
    c = V.T @ np.asarray(psi0, dtype=complex)
    proj = V.T @ np.asarray(probes).conj()
    return (np.exp(-1j * np.outer(times, spectrum.eigenvalues)) * c) @ proj


def refine_peak(times, values, i) -> tuple[float, float]:
    """Three-point parabolic refinement of a grid maximum at index ``i``."""
    if i <= 0 or i >= len(values) - 1:
        return float(times[i]), float(values[i])
    y0, y1, y2 = values[i - 1], values[i], values[i + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom >= 0:
        return float(times[i]), float(y1)
    d = 0.5 * (y0 - y2) / denom
    h = times[i + 1] - times[i]
    return float(times[i] + d * h), float(y1 - 0.25 * (y0 - y2) * d)


def reduced_search_time(spec: LatticeSpec) -> float:
    """``(pi/4) sqrt(N/3)``: rotation time of the three-state model."""
    return float(np.pi / 4.0 * np.sqrt(spec.num_sites / 3.0))


@dataclass(frozen=True, eq=False)
class SearchRun:
    """Localization on the three neighbors of the marked site over time.

    ``P_sites`` has one column per neighbor in :func:`neighbors_of` order;
    ``P_total`` is their sum and ``P_ell`` the overlap with ``|ell>``.
    """

    spec: LatticeSpec
    marked: SiteId
    start: str
    times: np.ndarray = field(repr=False)
    P_total: np.ndarray = field(repr=False)
    P_sites: np.ndarray = field(repr=False)
    P_marked: np.ndarray = field(repr=False)
    P_ell: np.ndarray = field(repr=False)
    ell_amplitude: np.ndarray = field(repr=False)
    T_peak: float
    P_peak: float
    E_plus: float
    T_reduced: float
    T_exact: float
    norm_error: float

    @property
    def baseline(self) -> float:
        """Average probability per site, ``1/N``."""
        return 1.0 / self.spec.num_sites

    def summary(self) -> dict:
        return {
            "cells": str(self.spec),
            "N": self.spec.num_sites,
            "marked": str(self.marked),
            "start": self.start,
            "T_peak": self.T_peak,
            "P_peak": self.P_peak,
            "E_plus": self.E_plus,
            "T_reduced": self.T_reduced,
            "T_exact": self.T_exact,
            "T_peak_times_E_plus": self.T_peak * self.E_plus,
            "baseline_site_probability": self.baseline,
            "norm_error": self.norm_error,
        }


def crossing_energy(spec: LatticeSpec, marked, spectrum: SpectrumResult) -> float:
    """``E_+`` from the eigensolver; on non-Dirac tori the lowest positive level seen by ``|ell>``."""
    if spec.dirac_exact:
        return gap_at_crossing(spec, marked, spectrum).E_plus
    w, V = spectrum.eigenvalues, spectrum.eigenvectors
    weight = (neighbor_state(spec, marked) @ V) ** 2
    cand = np.flatnonzero((w > 1e-10) & (weight > 1e-12))
    if cand.size == 0:
        raise NumericalError("no positive eigenvalue couples to the neighbor state")
    return float(w[cand[0]])


def start_state(spec: LatticeSpec, marked, start):
    if isinstance(start, str):
        key = start.replace("-", "_").lower()
        if key == "optimal":
            return "optimal", optimal_start_state(spec, marked)
        if key == "uniform_dirac":
            return "uniform_dirac", uniform_dirac_state(spec)
        raise ValueError(f"unknown start {start!r}; use 'optimal', 'uniform_dirac' or a state vector")
    return "custom", _check_state(start)


def run_search(spec: LatticeSpec, marked=DEFAULT_MARKED, start="optimal", dt=None, t_max=None,
               spectrum: SpectrumResult | None = None) -> SearchRun:
    """Evolve a start state under ``H_{gamma=1}`` and record neighbor-site probabilities.

    Defaults: ``dt = T_reduced/200`` and ``t_max = 2.5*T_reduced``. Time steps
    coarser than ``pi/(8 E_+)`` are rejected.
    """
    marked = _as_site(marked)
    label, psi0 = start_state(spec, marked, start)
    H = build_search_hamiltonian(spec, 1.0, marked)
    sp = _spectrum(H, spectrum)
    E_plus = crossing_energy(spec, marked, sp)

    T_red = reduced_search_time(spec)
    dt = T_red / 200.0 if dt is None else float(dt)
    t_max = 2.5 * T_red if t_max is None else float(t_max)
    if dt <= 0 or t_max <= 0:
        raise ValueError("dt and t_max must be positive")
    if dt > np.pi / (8.0 * E_plus):
        raise ValueError(f"dt={dt} undersamples the search oscillation (limit pi/(8 E+) = {np.pi / (8 * E_plus):.4g})")
    times = dt * np.arange(int(np.floor(t_max / dt + 1e-9)) + 1)

    nbrs = neighbor_indices(spec, marked)
    N = spec.num_sites
    probes = np.zeros((N, 5))
    probes[nbrs, [0, 1, 2]] = 1.0
    probes[:, 3] = site_vector(spec, marked)
    probes[:, 4] = neighbor_state(spec, marked)
    amp = amplitudes(sp, psi0, times, probes)
    P = np.abs(amp) ** 2

    c = sp.eigenvectors.T @ psi0
    norm_error = float(abs(np.linalg.norm(c) - 1.0))
    if norm_error > NORM_TOL:
        raise NumericalError(f"norm drift {norm_error:.3e}")

    P_sites = P[:, :3]
    P_total = P_sites.sum(axis=1)
    T_peak, P_peak = refine_peak(times, P_total, int(np.argmax(P_total)))
    return SearchRun(spec, marked, label, times, P_total, P_sites, P[:, 3], P[:, 4], amp[:, 4],
                     T_peak, P_peak, E_plus, T_red, np.pi / (2.0 * E_plus), norm_error)


# -- resolvent route ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ResolventAmplitude:
    times: np.ndarray
    full: np.ndarray
    envelope: np.ndarray
    E_plus: float


def amplitude_via_resolvent(spec: LatticeSpec, marked=DEFAULT_MARKED, t=0.0, start=None) -> ResolventAmplitude:
    """``<ell| exp(-iHt) |start>`` from the roots of ``F``, without any eigenvectors.

    ``start`` must lie in the unperturbed Dirac eigenspace (default: the
    optimal start state). ``full`` is the complete sum over perturbed
    energies; ``envelope`` is the two-level estimate
    ``|sin(E_+ t)| / (3^(1/4) I_2^(1/2))``.
    """
    marked = _as_site(marked)
    psi = optimal_start_state(spec, marked) if start is None else _check_state(start)
    times = np.atleast_1d(np.asarray(t, dtype=float))
    E = perturbed_energies(spec)
    dF = resolvent_dF(spec, E)
    weights = 1.0 / (E * np.abs(dF))
    overlap = np.vdot(site_vector(spec, marked), psi)
    full = overlap * (np.exp(-1j * np.outer(times, E)) @ weights)
    E_plus = float(E[E > 0][0])
    I2 = moment_sums(spec, 1)[0]
    envelope = np.abs(np.sin(E_plus * times)) / (3.0 ** 0.25 * np.sqrt(I2))
    return ResolventAmplitude(times, full, envelope, E_plus)


def start_overlaps(spec: LatticeSpec, marked=DEFAULT_MARKED, spectrum: SpectrumResult | None = None):
    """``|<s|psi_+>|`` and ``|<s|psi_->|`` for the crossing pair, from the eigenvectors."""
    marked = _as_site(marked)
    sp = _spectrum(build_search_hamiltonian(spec, 1.0, marked), spectrum)
    gap = gap_at_crossing(spec, marked, sp)
    s = optimal_start_state(spec, marked)
    w = sp.eigenvalues
    out = []
    for E in (gap.E_plus, gap.E_minus):
        idx = np.flatnonzero(np.abs(w - E) <= 1e-9)
        out.append(float(np.linalg.norm(sp.eigenvectors[:, idx].T @ s)))
    return tuple(out)


def start_overlap_via_resolvent(spec: LatticeSpec, marked=DEFAULT_MARKED) -> float:
    """``3^(1/4) |<s|marked>| / (E_+ |F'(E_+)|^(1/2))``."""
    E = perturbed_energies(spec)
    E_plus = E[E > 0][0]
    ov = abs(np.vdot(optimal_start_state(spec, marked), site_vector(spec, marked)))
    return float(3.0 ** 0.25 * ov / (E_plus * np.sqrt(abs(resolvent_dF(spec, E_plus)))))


# -- state transfer -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TransferRun:
    """Oscillation of localization between two marked sites.

    ``period`` is the first time the probability on ``|ell_2>`` peaks (above
    half of its maximum over the window); ``None`` when no such peak lies
    inside the window.
    """

    spec: LatticeSpec
    sites: tuple[SiteId, SiteId]
    times: np.ndarray = field(repr=False)
    P_ell1: np.ndarray = field(repr=False)
    P_ell2: np.ndarray = field(repr=False)
    period: float | None
    subspace_dim: int
    norm_error: float

    @property
    def relation(self) -> str:
        a, b = self.sites
        return "same" if a.sublattice is b.sublattice else "cross"

    def summary(self) -> dict:
        return {
            "cells": str(self.spec),
            "site1": str(self.sites[0]),
            "site2": str(self.sites[1]),
            "sublattice_pair": self.relation,
            "period": self.period,
            "initial_P_ell1": float(self.P_ell1[0]),
            "max_P_ell2": float(self.P_ell2.max()),
            "subspace_dim": self.subspace_dim,
            "norm_error": self.norm_error,
        }


def transfer_initial_state(spec: LatticeSpec, spectrum: SpectrumResult, site1) -> tuple[np.ndarray, int]:
    """``|ell_1>`` projected on all eigenstates below the first unperturbed band level, renormalized."""
    eps_min = smallest_positive_band_energy(spec)
    w, V = spectrum.eigenvalues, spectrum.eigenvectors
    sel = np.flatnonzero(np.abs(w) < eps_min - 1e-9)
    ell1 = neighbor_state(spec, site1)
    proj = V[:, sel] @ (V[:, sel].T @ ell1)
    norm = np.linalg.norm(proj)
    if norm < 1e-8:
        raise NumericalError("neighbor state has no weight below the first band level")
    return (proj / norm).astype(complex), int(sel.size)


def first_peak(times, values, frac=0.5):
    """Refined time of the first local maximum above ``frac * max(values)``."""
    thr = frac * values.max()
    inner = np.flatnonzero((values[1:-1] >= values[:-2]) & (values[1:-1] > values[2:]) & (values[1:-1] > thr))
    if inner.size == 0:
        return None
    return refine_peak(times, values, int(inner[0]) + 1)[0]


def run_transfer(spec: LatticeSpec, site1, site2, dt=None, t_max=None) -> TransferRun:
    """Two marked sites at ``gamma = 1``; start localized at site 1 and watch site 2.

    Defaults: ``dt = T_reduced/20`` and ``t_max = 100*T_reduced``.
    """
    s1, s2 = _as_site(site1), _as_site(site2)
    if s1 == s2:
        raise LatticeError("transfer needs two distinct marked sites")
    H = build_search_hamiltonian(spec, 1.0, [s1, s2])
    sp = eig_sym(H)
    psi0, dim = transfer_initial_state(spec, sp, s1)

    T_red = reduced_search_time(spec)
    dt = T_red / 20.0 if dt is None else float(dt)
    t_max = 100.0 * T_red if t_max is None else float(t_max)
    if dt <= 0 or t_max <= 0:
        raise ValueError("dt and t_max must be positive")
    times = dt * np.arange(int(np.floor(t_max / dt + 1e-9)) + 1)

    probes = np.column_stack([neighbor_state(spec, s1), neighbor_state(spec, s2)])
    P = np.abs(amplitudes(sp, psi0, times, probes)) ** 2
    norm_error = float(abs(np.linalg.norm(sp.eigenvectors.T @ psi0) - 1.0))
    if norm_error > NORM_TOL:
        raise NumericalError(f"norm drift {norm_error:.3e}")
    return TransferRun(spec, (s1, s2), times, P[:, 0], P[:, 1], first_peak(times, P[:, 1]), dim, norm_error)
