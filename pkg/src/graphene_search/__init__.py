"""Continuous-time quantum search on graphene (honeycomb) tori."""
from .analysis import (
    ScalingFit,
    ScalingLawRegressor,
    amplitude_envelope_study,
    gap_scaling_study,
    moments_study,
    search_time_study,
)
from .bloch import Valley, band_energies, dirac_state, dirac_states, dispersion, momentum_grid
from .dynamics import (
    amplitude_via_resolvent,
    propagate,
    reduced_search_time,
    run_search,
    run_transfer,
    start_overlaps,
)
from .exceptions import DiracUnavailable, GrapheneSearchError, LatticeError, NumericalError, PoleProximity
from .lattice import LatticeSpec, SiteId, Sublattice, build_lattice, neighbors_of, site_index
from .resolvent import epstein_zeta, moment_sums, perturbed_energies, resolvent_F, resolvent_root, verify_moment_limit
from .search import (
    build_search_hamiltonian,
    enumerate_start_states,
    neighbor_state,
    optimal_start_state,
    reduced_hamiltonian,
    uniform_dirac_state,
)
from .spectral import eig_sym, gamma_sweep, gap_at_crossing

__version__ = "0.1.0"

__all__ = [
    "DiracUnavailable", "GrapheneSearchError", "LatticeError", "LatticeSpec", "NumericalError",
    "PoleProximity", "ScalingFit", "ScalingLawRegressor", "SiteId", "Sublattice", "Valley",
    "amplitude_envelope_study", "amplitude_via_resolvent", "band_energies", "build_lattice",
    "build_search_hamiltonian", "dirac_state", "dirac_states", "dispersion", "eig_sym",
    "enumerate_start_states", "epstein_zeta", "gamma_sweep", "gap_at_crossing", "gap_scaling_study",
    "moment_sums", "moments_study", "momentum_grid", "neighbor_state", "neighbors_of",
    "optimal_start_state", "perturbed_energies", "propagate", "reduced_hamiltonian",
    "reduced_search_time", "resolvent_F", "resolvent_root", "run_search", "run_transfer",
    "search_time_study", "site_index", "start_overlaps", "uniform_dirac_state", "verify_moment_limit",
]
