"""Dense eigendecomposition, gamma sweeps and the gap at the avoided crossing."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bloch import band_energies
from .exceptions import NumericalError
from .lattice import LatticeSpec, build_lattice
from .search import (
    DEFAULT_MARKED,
    SearchHamiltonian,
    _as_site,
    analytic_zero_modes,
    build_search_hamiltonian,
    neighbor_state,
    perturbation,
    site_vector,
)

DEGENERACY_TOL = 1e-9
ZERO_MODE_TOL = 1e-10
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    """Ascending eigenvalues with orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def groups(self) -> list[np.ndarray]:
        """Index arrays of degenerate eigenvalues (consecutive gaps below ``DEGENERACY_TOL``)."""
        return degeneracy_groups(self.eigenvalues)

    def project(self, idx, vec) -> np.ndarray:
        """Coefficients of ``vec`` in the eigenvectors ``idx``."""
        V = self.eigenvectors[:, idx]
        return V.conj().T @ vec


def degeneracy_groups(values, tol=DEGENERACY_TOL) -> list[np.ndarray]:
    values = np.asarray(values)
    cuts = np.flatnonzero(np.diff(values) > tol) + 1
    return np.split(np.arange(len(values)), cuts)


def eig_sym(matrix) -> SpectrumResult:
    """Eigendecomposition of a real symmetric matrix.

    Eigenvector signs are fixed so that the largest-magnitude component of
    each column is positive, which makes the output reproducible.

    Raises
    ------
    ValueError
        Empty, non-square or non-symmetric input.
    """
    H = matrix.matrix if isinstance(matrix, SearchHamiltonian) else np.asarray(matrix)
    if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] == 0:
        raise ValueError(f"expected a non-empty square matrix, got shape {H.shape}")
    if np.iscomplexobj(H):
        raise ValueError("eig_sym handles real symmetric matrices only")
    asym = np.max(np.abs(H - H.T))
    if asym > SYMMETRY_TOL:
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    w, V = np.linalg.eigh(H)
    pivot = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[pivot, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    V = V * signs
    w.setflags(write=False)
    V.setflags(write=False)
    return SpectrumResult(w, V)


# -- gamma sweep ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GammaSweep:
    """Spectra of ``H_gamma`` on a uniform gamma grid with two tracked perturber branches.

    Attributes
    ----------
    gammas : (G,) array
    eigenvalues : (G, N) array, each row ascending
    branch_energies : (G, 2) array
        Energies of the upper (column 0) and lower (column 1) perturber branch.
    branch_weight : (G, 2) array
        Weight of the tracked state on ``span{|marked>, |ell>}``.
    branch_overlap : (G, 2) array
        Overlap with the tracked state at the previous gamma.
    broken : (G, 2) bool array
        True where ``branch_overlap < 0.5``.
    """

    spec: LatticeSpec
    marked: object
    gammas: np.ndarray
    eigenvalues: np.ndarray = field(repr=False)
    branch_energies: np.ndarray = field(repr=False)
    branch_weight: np.ndarray = field(repr=False)
    branch_overlap: np.ndarray = field(repr=False)

    @property
    def broken(self) -> np.ndarray:
        return self.branch_overlap < 0.5

    @property
    def branch_separation(self) -> np.ndarray:
        return self.branch_energies[:, 0] - self.branch_energies[:, 1]

    @property
    def crossing_index(self) -> int:
        """Grid index where the two branches come closest."""
        return int(np.argmin(self.branch_separation))

    @property
    def crossing_gamma(self) -> float:
        return float(self.gammas[self.crossing_index])

    def symmetry_error(self) -> np.ndarray:
        """Per-gamma ``max |lambda_i + lambda_{N-1-i}|``."""
        return np.max(np.abs(self.eigenvalues + self.eigenvalues[:, ::-1]), axis=1)


def gamma_grid(gamma_from, gamma_to, step):
    """Inclusive uniform grid; values rounded to 12 decimals so CSV output is stable."""
    if not gamma_to > gamma_from:
        raise ValueError("gamma_to must exceed gamma_from")
    if step <= 0:
        raise ValueError("step must be positive")
    count = int(round((gamma_to - gamma_from) / step)) + 1
    if count < 2:
        raise ValueError("gamma grid needs at least two points")
    return np.round(gamma_from + step * np.arange(count), 12)


def gamma_sweep(spec: LatticeSpec, marked=DEFAULT_MARKED, gamma_from=0.0, gamma_to=1.2,
                steps=None, step=0.005, executor=None) -> GammaSweep:
    """Diagonalize ``H_gamma`` across a gamma grid and follow the two perturber states.

    The branches are seeded by the ``+-sqrt(3)`` eigenpair of ``W`` at
    ``gamma = 0``. At every gamma the upper (lower) branch is the positive
    (negative) energy eigenspace carrying the largest weight on
    ``span{|marked>, |ell>}``; exact zero modes are excluded. The overlap
    with the previously tracked state is recorded as a continuity diagnostic.

    Parameters
    ----------
    steps : int, optional
        Number of grid points; overrides ``step`` when given.
    executor : concurrent.futures.Executor, optional
        Used to diagonalize grid points in parallel; results are collected
        in grid order.
    """
    if steps is not None:
        if steps < 2:
            raise ValueError("steps must be >= 2")
        gammas = np.round(np.linspace(gamma_from, gamma_to, steps), 12)
    else:
        gammas = gamma_grid(gamma_from, gamma_to, step)

    A = build_lattice(spec).dense
    W = perturbation(spec, marked)
    m_vec = site_vector(spec, marked)
    ell = neighbor_state(spec, marked)

    def solve(g):
        return eig_sym(-g * A + W)

    if executor is None:
        spectra = [solve(g) for g in gammas]
    else:
        spectra = list(executor.map(solve, gammas))

    G = len(gammas)
    energies = np.empty((G, 2))
    weights = np.empty((G, 2))
    overlaps = np.empty((G, 2))
    prev = [(m_vec + ell) / np.sqrt(2.0), (m_vec - ell) / np.sqrt(2.0)]

    for gi, sp in enumerate(spectra):
        w, V = sp.eigenvalues, sp.eigenvectors
        local = V[[int(np.argmax(m_vec))], :] ** 2 + (ell @ V) ** 2
        for b, sign in enumerate((1.0, -1.0)):
            best, best_weight = None, -1.0
            for grp in sp.groups:
                if sign * w[grp[0]] <= ZERO_MODE_TOL:
                    continue
                wt = float(local[0, grp].sum())
                if wt > best_weight + 1e-14:
                    best, best_weight = grp, wt
            if best is None:
                raise NumericalError(f"gamma={gammas[gi]}: no eigenvalue with sign {sign:+.0f}")
            coeffs = V[:, best].T @ prev[b]
            ov = float(np.linalg.norm(coeffs))
            if ov > 1e-12:
                vec = V[:, best] @ coeffs
            else:
                vec = V[:, best[0]]
            prev[b] = vec / np.linalg.norm(vec)
            energies[gi, b] = w[best].mean()
            weights[gi, b] = best_weight
            overlaps[gi, b] = ov

    eigs = np.vstack([sp.eigenvalues for sp in spectra])
    return GammaSweep(spec, _as_site(marked), gammas, eigs, energies, weights, overlaps)


# -- gap at gamma = 1 -------------------------------------------------------------


@dataclass(frozen=True)
class CrossingGap:
    E_plus: float
    E_minus: float
    gap: float
    eps_min: float
    zero_mode_count: int


def smallest_positive_band_energy(spec: LatticeSpec, tol=DEGENERACY_TOL) -> float:
    e = band_energies(spec)
    return float(e[e > tol].min())


def gap_at_crossing(spec: LatticeSpec, marked=DEFAULT_MARKED, spectrum: SpectrumResult | None = None
                    ) -> CrossingGap:
    """Perturbed energies ``E_+ = -E_-`` closest to the Dirac energy at ``gamma = 1``.

    Zero modes are removed by the ``ZERO_MODE_TOL`` threshold; the zero
    eigenspace is also required to contain the four analytic zero modes,
    otherwise the Hamiltonian is not at the crossing.
    """
    if spectrum is None:
        spectrum = eig_sym(build_search_hamiltonian(spec, 1.0, marked))
    w, V = spectrum.eigenvalues, spectrum.eigenvectors
    zero = np.flatnonzero(np.abs(w) <= ZERO_MODE_TOL)
    known = analytic_zero_modes(spec, marked)
    if zero.size < known.shape[1]:
        raise NumericalError(f"only {zero.size} zero modes found; expected >= {known.shape[1]} (wrong gamma?)")
    captured = np.linalg.norm(V[:, zero].T @ known, axis=0)
    if np.any(np.abs(captured - 1.0) > 1e-8):
        raise NumericalError(f"zero eigenspace misses analytic zero modes (captured norms {captured})")

    pos = w[w > ZERO_MODE_TOL]
    neg = w[w < -ZERO_MODE_TOL]
    eps_min = smallest_positive_band_energy(spec)
    if pos.size == 0 or neg.size == 0 or pos[0] >= eps_min - DEGENERACY_TOL:
        raise NumericalError("no perturbed eigenvalue below the first band level (wrong gamma?)")
    E_plus, E_minus = float(pos[0]), float(neg[-1])
    if abs(E_plus + E_minus) > 1e-9:
        raise NumericalError(f"crossing pair not symmetric: {E_plus} vs {E_minus}")
    return CrossingGap(E_plus, E_minus, E_plus - E_minus, eps_min, int(zero.size))
