"""Honeycomb torus geometry.

Sites are addressed as ``(alpha, beta, sublattice)`` where ``(alpha, beta)``
labels the unit cell ``R = alpha*a1 + beta*a2`` and the sublattice is A or B.
The flat ordering puts the whole A block first (row-major in alpha, beta),
then the B block, so the adjacency matrix has the bipartite form
``[[0, C], [C.T, 0]]``.

An A-site ``(alpha, beta)`` is bonded to the B-sites ``(alpha, beta)``,
``(alpha, beta-1)`` and ``(alpha+1, beta-1)``; a B-site uses the mirrored
rule. All cell indices wrap modulo ``(m, n)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .exceptions import LatticeError


class Sublattice(str, enum.Enum):
    A = "A"
    B = "B"

    @property
    def other(self) -> "Sublattice":
        return Sublattice.B if self is Sublattice.A else Sublattice.A


class SiteId(NamedTuple):
    alpha: int
    beta: int
    sublattice: Sublattice = Sublattice.A

    @classmethod
    def parse(cls, text: str) -> "SiteId":
        """Parse ``"alpha,beta,SUBL"`` (sublattice optional, default A)."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) not in (2, 3):
            raise LatticeError(f"cannot parse site {text!r}; expected 'alpha,beta,A|B'")
        try:
            alpha, beta = int(parts[0]), int(parts[1])
            sub = Sublattice(parts[2].upper()) if len(parts) == 3 else Sublattice.A
        except ValueError as exc:
            raise LatticeError(f"cannot parse site {text!r}: {exc}") from None
        return cls(alpha, beta, sub)

    def __str__(self) -> str:
        return f"{self.alpha},{self.beta},{Sublattice(self.sublattice).value}"


# relative cell offsets of the three neighbors, in the fixed output order
_A_TO_B_OFFSETS = ((0, 0), (0, -1), (1, -1))
_B_TO_A_OFFSETS = ((0, 0), (0, 1), (-1, 1))


@dataclass(frozen=True)
class LatticeSpec:
    """An ``m x n`` cell honeycomb torus with ``N = 2*m*n`` sites."""

    m: int = 12
    n: int = 12

    def __post_init__(self):
        for name in ("m", "n"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise LatticeError(f"{name} must be an integer, got {value!r}")
            if value < 2:
                # a single cell along either direction wraps a bond onto itself
                raise LatticeError(f"{name} must be >= 2, got {value}")

    @classmethod
    def parse(cls, text: str) -> "LatticeSpec":
        """Parse ``"MxN"``."""
        try:
            m, n = (int(t) for t in text.lower().split("x"))
        except ValueError:
            raise LatticeError(f"cannot parse cells {text!r}; expected 'MxN'") from None
        return cls(m, n)

    @property
    def num_cells(self) -> int:
        return self.m * self.n

    @property
    def num_sites(self) -> int:
        return 2 * self.m * self.n

    N = num_sites

    @property
    def dirac_exact(self) -> bool:
        """True when the momentum grid hits K and K' exactly."""
        return self.m % 3 == 0 and self.n % 3 == 0

    def __str__(self) -> str:
        return f"{self.m}x{self.n}"


def site_index(spec: LatticeSpec, site: SiteId) -> int:
    alpha, beta, sub = site
    if not (0 <= alpha < spec.m and 0 <= beta < spec.n):
        raise LatticeError(f"site {tuple(site)} outside {spec} torus")
    offset = 0 if Sublattice(sub) is Sublattice.A else spec.num_cells
    return offset + alpha * spec.n + beta


def index_site(spec: LatticeSpec, i: int) -> SiteId:
    if not 0 <= i < spec.num_sites:
        raise LatticeError(f"index {i} outside [0, {spec.num_sites})")
    sub = Sublattice.A if i < spec.num_cells else Sublattice.B
    alpha, beta = divmod(i % spec.num_cells, spec.n)
    return SiteId(alpha, beta, sub)


def wrap(spec: LatticeSpec, alpha: int, beta: int, sublattice=Sublattice.A) -> SiteId:
    """Reduce cell coordinates modulo the torus."""
    return SiteId(alpha % spec.m, beta % spec.n, Sublattice(sublattice))


def neighbors_of(spec: LatticeSpec, site: SiteId) -> list[SiteId]:
    """The three nearest neighbors of ``site``, in the fixed bond order."""
    site_index(spec, site)  # range check
    alpha, beta, sub = site
    sub = Sublattice(sub)
    offsets = _A_TO_B_OFFSETS if sub is Sublattice.A else _B_TO_A_OFFSETS
    return [wrap(spec, alpha + da, beta + db, sub.other) for da, db in offsets]


@dataclass(frozen=True, eq=False)
class Adjacency:
    """Adjacency of the torus: dense symmetric 0/1 matrix plus neighbor table.

    Both arrays are read-only.
    """

    spec: LatticeSpec
    dense: np.ndarray = field(repr=False)
    neighbors: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return self.spec.num_sites

    def matvec(self, psi):
        """``A @ psi`` in O(N) using the neighbor table."""
        psi = np.asarray(psi)
        return psi[self.neighbors].sum(axis=1)


@lru_cache(maxsize=32)
def build_lattice(spec: LatticeSpec) -> Adjacency:
    """Build the 3-regular bipartite adjacency of the periodic honeycomb torus."""
    m, n = spec.m, spec.n
    cells = m * n
    alpha, beta = np.divmod(np.arange(cells), n)

    a_to_b = np.empty((cells, 3), dtype=np.intp)
    b_to_a = np.empty((cells, 3), dtype=np.intp)
    for j, (da, db) in enumerate(_A_TO_B_OFFSETS):
        a_to_b[:, j] = cells + ((alpha + da) % m) * n + (beta + db) % n
    for j, (da, db) in enumerate(_B_TO_A_OFFSETS):
        b_to_a[:, j] = ((alpha + da) % m) * n + (beta + db) % n
    neighbors = np.vstack([a_to_b, b_to_a])

    dense = np.zeros((2 * cells, 2 * cells))
    rows = np.repeat(np.arange(2 * cells), 3)
    dense[rows, neighbors.ravel()] = 1.0
    if not np.array_equal(dense, dense.T) or not np.all(dense.sum(axis=1) == 3):
        raise LatticeError(f"{spec}: neighbor rule produced a non-simple graph")

    dense.setflags(write=False)
    neighbors.setflags(write=False)
    return Adjacency(spec, dense, neighbors)
