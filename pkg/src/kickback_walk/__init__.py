"""Two-walker interacting quantum walk with noncommuting impurities.

Exact dynamics on the pair lattice {(x1, x2): 1 <= x1 < x2 <= s} and sampling
of the Markov jump process whose one-time law follows |psi_t|^2.
"""

from .lattice import ChainConfig, PairState, SiteIndexing, enumerate_sites, neighbours
from .hamiltonian import (
    ReducedHamiltonian,
    SectorHamiltonian,
    build_reduced,
    build_sector,
    flipped_edges,
    verify_conservation,
)
from .propagator import Wavefunction, amplitude_series, evolve, initial_state, probability_profile
from .process import RateField, SamplerSettings, Trajectory, ensemble, rate_field, sample_trajectory
from .stats import EmpiricalCDF, conditional_cdfs, first_passage_time, sojourn_time

__all__ = [
    "ChainConfig",
    "PairState",
    "SiteIndexing",
    "enumerate_sites",
    "neighbours",
    "ReducedHamiltonian",
    "SectorHamiltonian",
    "build_reduced",
    "build_sector",
    "flipped_edges",
    "verify_conservation",
    "Wavefunction",
    "amplitude_series",
    "evolve",
    "initial_state",
    "probability_profile",
    "RateField",
    "SamplerSettings",
    "Trajectory",
    "ensemble",
    "rate_field",
    "sample_trajectory",
    "EmpiricalCDF",
    "conditional_cdfs",
    "first_passage_time",
    "sojourn_time",
]
