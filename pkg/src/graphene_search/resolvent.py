"""Resolvent description of the perturbed spectrum.

A perturbed eigenenergy ``E`` (one not already in the unperturbed spectrum)
satisfies ``F(E) = 0`` with::

    F(E) = sqrt(3)/N * sum_k [1/(E - eps_k) + 1/(E + eps_k)]

where ``eps_k >= 0`` runs over the band energies of all grid momenta.
Between two consecutive poles ``F`` falls monotonically from ``+inf`` to
``-inf``, so every pole interval holds exactly one root.

Near ``E = 0`` the two Dirac momenta contribute ``4*sqrt(3)/(N E)`` and the
rest expands in the inverse-power moments ``I_2n``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .bloch import SQRT3, band_energies
from .exceptions import DiracUnavailable, NumericalError, PoleProximity
from .lattice import LatticeSpec

POLE_TOL = 1e-12
POLE_MERGE_TOL = 1e-9

#: Quadratic form of the Dirac cone on the torus grid, identical for K and K'.
S_DIRAC = 4.0 * np.pi**2 * np.array([[2.0, -1.0], [-1.0, 2.0]])


@dataclass(frozen=True, eq=False)
class PoleTable:
    """Distinct positive band energies with multiplicities, plus the Dirac count."""

    N: int
    poles: np.ndarray
    counts: np.ndarray
    n_dirac: int


@lru_cache(maxsize=64)
def pole_table(spec: LatticeSpec) -> PoleTable:
    e = np.sort(band_energies(spec))
    n_dirac = int(np.count_nonzero(e <= POLE_MERGE_TOL))
    e = e[n_dirac:]
    groups = np.split(e, np.flatnonzero(np.diff(e) > POLE_MERGE_TOL) + 1)
    poles = np.array([g.mean() for g in groups])
    counts = np.array([len(g) for g in groups], dtype=float)
    poles.setflags(write=False)
    counts.setflags(write=False)
    return PoleTable(spec.num_sites, poles, counts, n_dirac)


def _check_poles(table: PoleTable, E):
    E = np.atleast_1d(np.asarray(E, dtype=float))
    if table.n_dirac and np.any(np.abs(E) < POLE_TOL):
        raise PoleProximity(float(E[np.argmin(np.abs(E))]), 0.0)
    dist = np.abs(np.abs(E)[:, None] - table.poles[None, :])
    if np.any(dist < POLE_TOL):
        i, j = np.unravel_index(np.argmin(dist), dist.shape)
        raise PoleProximity(float(E[i]), float(np.copysign(table.poles[j], E[i])))


def resolvent_F(spec: LatticeSpec, E):
    """Quantization function ``F(E)``; vectorized over ``E``."""
    table = pole_table(spec)
    _check_poles(table, E)
    Ea = np.asarray(E, dtype=float)
    x = np.atleast_1d(Ea)[:, None]
    eps = table.poles[None, :]
    s = (table.counts * (1.0 / (x - eps) + 1.0 / (x + eps))).sum(axis=1)
    if table.n_dirac:
        s = s + 2.0 * table.n_dirac / x[:, 0]
    out = SQRT3 / table.N * s
    return float(out[0]) if Ea.ndim == 0 else out


def resolvent_dF(spec: LatticeSpec, E):
    """``F'(E)``, always negative."""
    table = pole_table(spec)
    _check_poles(table, E)
    Ea = np.asarray(E, dtype=float)
    x = np.atleast_1d(Ea)[:, None]
    eps = table.poles[None, :]
    s = (table.counts * (1.0 / (x - eps) ** 2 + 1.0 / (x + eps) ** 2)).sum(axis=1)
    if table.n_dirac:
        s = s + 2.0 * table.n_dirac / x[:, 0] ** 2
    out = -SQRT3 / table.N * s
    return float(out[0]) if Ea.ndim == 0 else out


def bisect_secant(f, a, b, xtol=1e-13, max_iter=400):
    """Root of a decreasing ``f`` bracketed by ``f(a) > 0 > f(b)``.

    Bisection down to ``xtol`` (or until the midpoint stops moving), then
    one secant step, kept only if it stays inside the final bracket.
    """
    fa, fb = f(a), f(b)
    if not (fa > 0 > fb):
        raise NumericalError(f"no sign change on [{a!r}, {b!r}]: f={fa!r}, {fb!r}")
    for _ in range(max_iter):
        if b - a <= xtol:
            break
        c = 0.5 * (a + b)
        if c <= a or c >= b:
            break
        fc = f(c)
        if fc == 0.0:
            return c
        if fc > 0:
            a, fa = c, fc
        else:
            b, fb = c, fc
    c = b - fb * (b - a) / (fb - fa)
    if a <= c <= b:
        return c
    return 0.5 * (a + b)


def resolvent_root(spec: LatticeSpec) -> float:
    """The perturbed energy ``E_+`` in ``(0, eps_min)``."""
    if not spec.dirac_exact:
        raise DiracUnavailable(f"{spec}: F has no Dirac pole, so no root below the first band level")
    eps_min = pole_table(spec).poles[0]
    lo, hi = 1e-6 * eps_min, eps_min * (1.0 - 1e-6)
    return bisect_secant(lambda E: resolvent_F(spec, E), lo, hi)


def perturbed_energies(spec: LatticeSpec) -> np.ndarray:
    """Every root of ``F`` (one per gap between consecutive distinct poles), ascending."""
    table = pole_table(spec)
    poles = table.poles
    positive = []
    edges = ([0.0] if table.n_dirac else []) + list(poles)
    for a, b in zip(edges[:-1], edges[1:]):
        delta = 1e-9 * (b - a)
        f = lambda E: resolvent_F(spec, E)
        while not (f(a + delta) > 0 > f(b - delta)):
            delta *= 1e-2
            if delta < 1e-15 * (b - a):
                raise NumericalError(f"cannot bracket root in ({a}, {b})")
        positive.append(bisect_secant(f, a + delta, b - delta, xtol=1e-15 * max(1.0, b)))
    positive = np.array(positive)
    if not table.n_dirac:
        # F is odd with no pole at 0, so E = 0 itself is a root
        return np.concatenate([-positive[::-1], [0.0], positive])
    return np.concatenate([-positive[::-1], positive])


def moment_sums(spec: LatticeSpec, n_max: int) -> np.ndarray:
    """``[I_2, I_4, ..., I_{2 n_max}]`` with the Dirac momenta left out.

    Odd moments vanish identically by the symmetry of the spectrum and are
    not returned.
    """
    if not spec.dirac_exact:
        raise DiracUnavailable(f"{spec}: Dirac momenta are not on the grid")
    table = pole_table(spec)
    ks = np.arange(1, n_max + 1)
    sums = (table.counts[None, :] * table.poles[None, :] ** (-2.0 * ks[:, None])).sum(axis=1)
    return 2.0 * SQRT3 / table.N * sums


def moment(spec: LatticeSpec, n: int) -> float:
    """Single moment ``I_n``; zero for odd ``n``."""
    if n % 2:
        return 0.0
    return float(moment_sums(spec, n // 2)[-1])


def leading_order_root(spec: LatticeSpec) -> float:
    """``sqrt(4 sqrt3 / (N I_2))``: root of the expansion truncated after ``I_2``."""
    I2 = moment_sums(spec, 1)[0]
    return float(np.sqrt(4.0 * SQRT3 / (spec.num_sites * I2)))


# -- Epstein zeta -----------------------------------------------------------------


@dataclass(frozen=True)
class EpsteinResult:
    value: float
    truncated: float
    tail: float
    tail_bound: float
    cutoff: int


def _check_form(S):
    S = np.asarray(S, dtype=float)
    if S.shape != (2, 2) or not np.allclose(S, S.T):
        raise ValueError("S must be a symmetric 2x2 matrix")
    if np.any(np.linalg.eigvalsh(S) <= 0):
        raise ValueError("S must be positive definite")
    return S


def _quadratic_form(S, p, q):
    return S[0, 0] * p * p + 2.0 * S[0, 1] * p * q + S[1, 1] * q * q


def box_sum(S, x, half_width, chunk=256) -> float:
    """``sum_{0 < max(|p|,|q|) <= half_width} Q(p,q)^(-x)`` in row chunks."""
    S = _check_form(S)
    R = int(half_width)
    q = np.arange(-R, R + 1, dtype=float)
    total = 0.0
    for start in range(-R, R + 1, chunk):
        p = np.arange(start, min(start + chunk, R + 1), dtype=float)[:, None]
        Q = _quadratic_form(S, p, q[None, :])
        Q[Q == 0.0] = np.inf  # origin
        total += float(np.sum(Q ** (-x)))
    return total


def epstein_zeta(S, x, cutoff=1000) -> EpsteinResult:
    """``Z_2(S, x) = 1/2 sum_{(p,q) != 0} (S11 p^2 + 2 S12 p q + S22 q^2)^(-x)``.

    The lattice sum is taken exactly over the square ``|p|, |q| <= cutoff``.
    The remainder is estimated by the integral of ``Q^(-x)`` outside the
    square of half-width ``cutoff + 1/2`` (each lattice point standing for
    its unit cell); ``tail_bound`` is the same integral outside the disc of
    radius ``cutoff``, which contains the whole remainder region.
    """
    S = _check_form(S)
    if x < 2:
        raise ValueError("x >= 2 required")
    if cutoff < 10:
        raise ValueError("cutoff >= 10 required")

    def angular(theta):
        return _quadratic_form(S, np.cos(theta), np.sin(theta)) ** (-x)

    def square_tail(theta):
        edge = (cutoff + 0.5) / max(abs(np.cos(theta)), abs(np.sin(theta)))
        return angular(theta) * edge ** (2.0 - 2.0 * x) / (2.0 * x - 2.0)

    pts = np.pi / 4 * np.arange(1, 8)
    tail = integrate.quad(square_tail, 0.0, 2 * np.pi, points=pts, limit=200, epsabs=0, epsrel=1e-10)[0]
    disc = integrate.quad(angular, 0.0, 2 * np.pi, limit=200, epsabs=0, epsrel=1e-10)[0]
    bound = disc * float(cutoff) ** (2.0 - 2.0 * x) / (2.0 * x - 2.0)
    truncated = box_sum(S, x, cutoff)
    return EpsteinResult(0.5 * (truncated + tail), 0.5 * truncated, 0.5 * tail, 0.5 * bound, cutoff)


# -- moment limit -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MomentLimitReport:
    """Finite-size ratios ``I_2k / N^(k-1)`` against the two candidate limits.

    ``candidates`` maps the prefactor label to the predicted limit
    ``prefactor * (Z_2(S_K, k) + Z_2(S_K', k))``.
    """

    k: int
    sizes: list[int]
    N: np.ndarray
    ratios: np.ndarray
    candidates: dict[str, float]
    extrapolated: float
    verdict: str
    monotone: bool
    rows: list[dict] = field(repr=False, default_factory=list)


def _extrapolate(m, y):
    # y ~ L + b/m + c/m^2 over the supplied sizes
    X = np.column_stack([np.ones_like(m), 1.0 / m, 1.0 / m**2])
    coef = np.linalg.lstsq(X, y, rcond=None)[0]
    return float(coef[0])


def verify_moment_limit(sizes, k=2, S=None, cutoff=1000) -> MomentLimitReport:
    """Compare ``I_2k / N^(k-1)`` over ``m = n`` in ``sizes`` with ``c*sqrt3*(Z_2 + Z_2)``, c = 2 or 4.

    With ``S`` given, the lattice moments are replaced by the control
    sequence ``box_sum(S, k, m) / 2`` which converges to ``Z_2(S, k)``; the
    candidates are then ``Z_2`` itself and ``Z_2 / 2``.
    """
    if k < 2:
        raise ValueError("k >= 2 required; I_2 diverges logarithmically")
    sizes = [int(s) for s in sizes]
    m = np.array(sizes, dtype=float)
    if S is None:
        z = epstein_zeta(S_DIRAC, k, cutoff).value
        candidates = {"4*sqrt(3)": 4 * SQRT3 * 2 * z, "2*sqrt(3)": 2 * SQRT3 * 2 * z}
        N = 2.0 * m * m
        ratios = np.array([moment_sums(LatticeSpec(s, s), k)[-1] for s in sizes]) / N ** (k - 1)
    else:
        z = epstein_zeta(S, k, cutoff).value
        candidates = {"Z2": z, "Z2/2": 0.5 * z}
        N = 2.0 * m * m
        ratios = np.array([0.5 * box_sum(S, k, s) for s in sizes])
    limit = _extrapolate(m, ratios) if len(sizes) >= 3 else float(ratios[-1])
    verdict = min(candidates, key=lambda c: abs(candidates[c] - limit))
    d = np.diff(ratios)
    monotone = bool(np.all(d <= 0) or np.all(d >= 0))
    rows = [{"m": s, "N": int(n), "ratio": float(r), **{f"limit_{c}": v for c, v in candidates.items()}}
            for s, n, r in zip(sizes, N, ratios)]
    return MomentLimitReport(k, sizes, N, ratios, candidates, limit, verdict, monotone, rows)
