"""Exception hierarchy for graphene_search."""


class GrapheneSearchError(Exception):
    """Base class for all package errors."""


class LatticeError(GrapheneSearchError, ValueError):
    """Invalid lattice geometry or site address."""


class DiracUnavailable(GrapheneSearchError):
    """The torus has no momenta exactly on the Dirac points (m or n not a multiple of 3)."""


class NumericalError(GrapheneSearchError, ArithmeticError):
    """A numerical stage failed an internal consistency check."""


class PoleProximity(NumericalError):
    """Resolvent evaluated too close to an unperturbed eigenvalue.

    Attributes
    ----------
    pole : float
        The offending unperturbed energy.
    """

    def __init__(self, energy, pole):
        self.energy = energy
        self.pole = pole
        super().__init__(f"E={energy!r} lies within tolerance of pole at {pole!r}")
