"""Momentum-space description of the unperturbed torus.

Energies are in units of the hopping strength with lattice constant ``a = 1``.
The unperturbed reference Hamiltonian used everywhere else is ``H0 = -A``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import DiracUnavailable, NumericalError
from .lattice import LatticeSpec, Sublattice

SQRT3 = np.sqrt(3.0)
_RADICAND_TOL = 1e-12
# exp(2 pi i e / 3) for e = 0, 1, 2, with exactly cancelling components
_CUBE_ROOTS = np.array([1.0, complex(-0.5, SQRT3 / 2), complex(-0.5, -SQRT3 / 2)])


class Valley(str, enum.Enum):
    K = "K"
    KP = "K'"


class QuasiMomentum(NamedTuple):
    p: int
    q: int
    kx: float
    ky: float


def momentum_grid(spec: LatticeSpec) -> list[QuasiMomentum]:
    """All ``m*n`` allowed quasi-momenta of the torus, ordered by ``(p, q)``."""
    grid = []
    for p in range(spec.m):
        kx = 2.0 * np.pi * p / spec.m
        for q in range(spec.n):
            ky = (4.0 * np.pi * q / spec.n - kx) / SQRT3
            grid.append(QuasiMomentum(p, q, kx, ky))
    return grid


def _band_radicand(kx, ky):
    cx = np.cos(np.asarray(kx) / 2.0)
    return 1.0 + 4.0 * cx**2 + 4.0 * cx * np.cos(SQRT3 * np.asarray(ky) / 2.0)


def _sqrt_radicand(r):
    r = np.asarray(r, dtype=float)
    if np.any(r < -_RADICAND_TOL):
        raise NumericalError(f"negative band radicand {r.min():.3e}")
    return np.sqrt(np.clip(r, 0.0, None))


def dispersion(k, v=1.0, eps_D=0.0):
    """Upper and lower band energies at quasi-momentum ``k``.

    Parameters
    ----------
    k : QuasiMomentum or tuple (kx, ky)
    v : float
        Hopping strength.
    eps_D : float
        On-site (Dirac) energy.

    Returns
    -------
    (upper, lower) : tuple of float
    """
    if isinstance(k, QuasiMomentum):
        kx, ky = k.kx, k.ky
    else:
        kx, ky = k
    root = float(_sqrt_radicand(_band_radicand(kx, ky)))
    return eps_D + v * root, eps_D - v * root


def band_energies(spec: LatticeSpec) -> np.ndarray:
    """Non-negative band energies ``|eps(k)|`` for every grid momentum (v=1), shape ``(m*n,)``."""
    p, q = np.meshgrid(np.arange(spec.m), np.arange(spec.n), indexing="ij")
    kx = 2.0 * np.pi * p / spec.m
    ky = (4.0 * np.pi * q / spec.n - kx) / SQRT3
    return _sqrt_radicand(_band_radicand(kx, ky)).ravel()


def unperturbed_spectrum(spec: LatticeSpec, v=1.0, eps_D=0.0) -> np.ndarray:
    """Sorted spectrum of ``eps_D*I + v*A`` from the dispersion relation."""
    e = band_energies(spec)
    return np.sort(np.concatenate([eps_D + v * e, eps_D - v * e]))


def dirac_count(spec: LatticeSpec, tol=1e-9) -> int:
    return int(np.count_nonzero(np.abs(unperturbed_spectrum(spec)) <= tol))


# integer phase exponents (in units of 2*pi/3) of the two valleys
def _valley_exponent(valley: Valley, alpha, beta, sublattice: Sublattice):
    sigma = 1 if sublattice is Sublattice.B else 0
    if valley is Valley.K:
        return (alpha + 2 * beta + 2 * sigma) % 3
    return (2 * alpha + beta) % 3


def dirac_phase(valley, alpha, beta, sublattice=Sublattice.A):
    """Unit-modulus phase of a Dirac state on cell ``(alpha, beta)``.

    The exponent is reduced mod 3 in integers and mapped onto a fixed
    table of cube roots of unity, so no phase error accumulates on large
    tori and ``1 + w + w^2`` cancels exactly.
    """
    e = _valley_exponent(Valley(valley), alpha, beta, Sublattice(sublattice))
    return _CUBE_ROOTS[e]


@dataclass(frozen=True, eq=False)
class DiracState:
    valley: Valley
    sublattice: Sublattice
    amplitudes: np.ndarray = field(repr=False)


def dirac_state(spec: LatticeSpec, valley, sublattice) -> DiracState:
    if not spec.dirac_exact:
        raise DiracUnavailable(f"{spec}: m and n must be multiples of 3 for exact Dirac states")
    valley, sublattice = Valley(valley), Sublattice(sublattice)
    alpha, beta = np.divmod(np.arange(spec.num_cells), spec.n)
    psi = np.zeros(spec.num_sites, dtype=complex)
    block = slice(0, spec.num_cells) if sublattice is Sublattice.A else slice(spec.num_cells, None)
    psi[block] = np.sqrt(2.0 / spec.num_sites) * dirac_phase(valley, alpha, beta, sublattice)
    psi.setflags(write=False)
    return DiracState(valley, sublattice, psi)


def dirac_states(spec: LatticeSpec) -> dict[tuple[Valley, Sublattice], DiracState]:
    """The four zero-energy states, keyed by ``(valley, sublattice)``.

    Order: (K, A), (K', A), (K, B), (K', B).
    """
    keys = [(Valley.K, Sublattice.A), (Valley.KP, Sublattice.A),
            (Valley.K, Sublattice.B), (Valley.KP, Sublattice.B)]
    return {key: dirac_state(spec, *key) for key in keys}
