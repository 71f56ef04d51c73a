"""Marked-site search Hamiltonian ``H = -gamma*A + W`` and its reduced model.

The marking perturbation rewires the hopping between the marked site and
its three neighbors::

    W = sqrt(3) * (|marked><ell| + |ell><marked|)

with ``|ell>`` the normalized symmetric superposition of the neighbors. At
``gamma = 1`` the bonds of the marked site cancel exactly, leaving it
decoupled from the rest of the torus.
"""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .bloch import SQRT3, Valley, dirac_phase, dirac_state, dirac_states
from .exceptions import DiracUnavailable, LatticeError
from .lattice import LatticeSpec, SiteId, Sublattice, build_lattice, neighbors_of, site_index

DEFAULT_MARKED = SiteId(0, 0, Sublattice.A)
PERTURBATION_STRENGTH = SQRT3


def _as_site(site) -> SiteId:
    if isinstance(site, SiteId):
        return SiteId(int(site.alpha), int(site.beta), Sublattice(site.sublattice))
    if isinstance(site, str):
        return SiteId.parse(site)
    alpha, beta, *rest = site
    return SiteId(int(alpha), int(beta), Sublattice(rest[0]) if rest else Sublattice.A)


def _as_sites(marked) -> tuple[SiteId, ...]:
    if isinstance(marked, (SiteId, str)):
        return (_as_site(marked),)
    marked = list(marked)
    if marked and isinstance(marked[0], (int, np.integer)):
        return (_as_site(marked),)
    return tuple(_as_site(s) for s in marked)


def site_vector(spec: LatticeSpec, site) -> np.ndarray:
    e = np.zeros(spec.num_sites)
    e[site_index(spec, _as_site(site))] = 1.0
    return e


def neighbor_indices(spec: LatticeSpec, marked) -> list[int]:
    return [site_index(spec, s) for s in neighbors_of(spec, _as_site(marked))]


def neighbor_state(spec: LatticeSpec, marked=DEFAULT_MARKED) -> np.ndarray:
    """``|ell>``: equal-weight (1/sqrt 3) superposition of the marked site's neighbors."""
    ell = np.zeros(spec.num_sites)
    ell[neighbor_indices(spec, marked)] = 1.0 / SQRT3
    return ell


def perturbation(spec: LatticeSpec, marked=DEFAULT_MARKED, strength=PERTURBATION_STRENGTH):
    """Dense rank-2 bond perturbation ``W`` for one marked site."""
    i = site_index(spec, _as_site(marked))
    nbrs = neighbor_indices(spec, marked)
    W = np.zeros((spec.num_sites, spec.num_sites))
    W[i, nbrs] = strength / SQRT3
    W[nbrs, i] = strength / SQRT3
    return W


@dataclass(frozen=True, eq=False)
class SearchHamiltonian:
    spec: LatticeSpec
    gamma: float
    marked: tuple[SiteId, ...]
    matrix: np.ndarray = field(repr=False)

    @property
    def site(self) -> SiteId:
        """The (first) marked site."""
        return self.marked[0]

    @property
    def N(self) -> int:
        return self.spec.num_sites


def build_search_hamiltonian(spec: LatticeSpec, gamma=1.0, marked=DEFAULT_MARKED) -> SearchHamiltonian:
    """Assemble ``-gamma*A + sum_j W_j``.

    ``marked`` is a single site or a sequence of distinct sites; every site
    receives its own bond perturbation.
    """
    sites = _as_sites(marked)
    if not sites:
        raise LatticeError("at least one marked site is required")
    if len(set(sites)) != len(sites):
        raise LatticeError(f"marked sites must be distinct: {[str(s) for s in sites]}")
    H = -float(gamma) * build_lattice(spec).dense
    for s in sites:
        H = H + perturbation(spec, s)
    H.setflags(write=False)
    return SearchHamiltonian(spec, float(gamma), sites, H)


def _require_dirac(spec: LatticeSpec):
    if not spec.dirac_exact:
        raise DiracUnavailable(f"{spec}: m and n must be multiples of 3")


def marked_phases(marked) -> tuple[complex, complex]:
    """Dirac-state phases ``(e^{i theta_K}, e^{i theta_K'})`` at the marked site."""
    s = _as_site(marked)
    return (complex(dirac_phase(Valley.K, s.alpha, s.beta, s.sublattice)),
            complex(dirac_phase(Valley.KP, s.alpha, s.beta, s.sublattice)))


def reduced_basis(spec: LatticeSpec, marked=DEFAULT_MARKED) -> np.ndarray:
    """Columns ``|K>, |K'>, |ell>``, Dirac states on the marked site's sublattice."""
    _require_dirac(spec)
    s = _as_site(marked)
    return np.column_stack([
        dirac_state(spec, Valley.K, s.sublattice).amplitudes,
        dirac_state(spec, Valley.KP, s.sublattice).amplitudes,
        neighbor_state(spec, s).astype(complex),
    ])


@dataclass(frozen=True, eq=False)
class ReducedHamiltonian:
    """Three-state model at the crossing, in the basis ``(|K>, |K'>, |ell>)``.

    ``eigenvectors`` columns are ordered ``(psi_+, psi_0, psi_-)`` to match
    ``eigenvalues``.
    """

    spec: LatticeSpec
    marked: SiteId
    matrix: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)

    def lift(self, coeffs) -> np.ndarray:
        """Expand reduced-basis coefficients into a full-lattice state."""
        return reduced_basis(self.spec, self.marked) @ np.asarray(coeffs)


def reduced_hamiltonian(spec: LatticeSpec, marked=DEFAULT_MARKED) -> ReducedHamiltonian:
    _require_dirac(spec)
    s = _as_site(marked)
    uK, uKp = marked_phases(s)
    g = np.sqrt(6.0 / spec.num_sites)
    H = g * np.array([
        [0, 0, np.conj(uK)],
        [0, 0, np.conj(uKp)],
        [uK, uKp, 0],
    ], dtype=complex)
    e = 2.0 * np.sqrt(3.0 / spec.num_sites)
    r2 = np.sqrt(2.0)
    plus = 0.5 * np.array([np.conj(uK), np.conj(uKp), r2])
    minus = 0.5 * np.array([np.conj(uK), np.conj(uKp), -r2])
    zero = np.array([np.conj(uK), -np.conj(uKp), 0]) / r2
    return ReducedHamiltonian(spec, s, H, np.array([e, 0.0, -e]), np.column_stack([plus, zero, minus]))


def project_hamiltonian(H, basis) -> np.ndarray:
    """``basis^dagger @ H @ basis``."""
    H = H.matrix if isinstance(H, SearchHamiltonian) else H
    return basis.conj().T @ H @ basis


def optimal_start_state(spec: LatticeSpec, marked=DEFAULT_MARKED) -> np.ndarray:
    """``|s> = (|psi_+> + |psi_->)/sqrt 2``: the Dirac combination that rotates into ``|ell>``."""
    _require_dirac(spec)
    s = _as_site(marked)
    uK, uKp = marked_phases(s)
    K = dirac_state(spec, Valley.K, s.sublattice).amplitudes
    Kp = dirac_state(spec, Valley.KP, s.sublattice).amplitudes
    return (np.conj(uK) * K + np.conj(uKp) * Kp) / np.sqrt(2.0)


def start_state_class(marked) -> tuple[Sublattice, int]:
    """Which of the six optimal start states serves ``marked``: ``(sublattice, (alpha-beta) mod 3)``."""
    s = _as_site(marked)
    return s.sublattice, (s.alpha - s.beta) % 3


def enumerate_start_states(spec: LatticeSpec) -> dict[tuple[Sublattice, int], np.ndarray]:
    """All six optimal start states keyed by :func:`start_state_class`.

    The start state depends on the marked site only through its sublattice
    and the residue of ``alpha - beta`` mod 3, so one representative per
    class covers every site.
    """
    _require_dirac(spec)
    return {
        (sub, r): optimal_start_state(spec, SiteId(r, 0, sub))
        for sub in (Sublattice.A, Sublattice.B)
        for r in range(3)
    }


def uniform_dirac_state(spec: LatticeSpec) -> np.ndarray:
    """Equal-weight superposition of the four Dirac states."""
    _require_dirac(spec)
    return 0.5 * sum(d.amplitudes for d in dirac_states(spec).values())


def analytic_zero_modes(spec: LatticeSpec, marked=DEFAULT_MARKED) -> np.ndarray:
    """Known exact zero modes of ``H`` at ``gamma = 1`` (columns).

    The marked site itself, both Dirac states on the opposite sublattice and
    the reduced-model ``psi_0`` combination.
    """
    _require_dirac(spec)
    s = _as_site(marked)
    red = reduced_hamiltonian(spec, s)
    other = s.sublattice.other
    return np.column_stack([
        site_vector(spec, s).astype(complex),
        dirac_state(spec, Valley.K, other).amplitudes,
        dirac_state(spec, Valley.KP, other).amplitudes,
        red.lift(red.eigenvectors[:, 1]),
    ])
