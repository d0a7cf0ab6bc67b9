"""Diffusion LMS over networks with random transmission failures.

Simulation and closed-form steady-state analysis side by side, plus a MAC
(exponential backoff) model of where the failure probabilities come from.
"""

from lossy_diffusion.topology import Topology, build_from_adjacency, random_geometric
from lossy_diffusion.errors import ErrorModel, uniform_error_model, sample_success_sets
from lossy_diffusion.combiners import CombiningRule, effective_degrees, weights
from lossy_diffusion.theory import (
    NodeProfile,
    SpatialCorrelation,
    TrueParameter,
    scalar_coefficients,
    weight_moments,
    build_moment_system,
    steady_state_msd,
    mean_trajectory,
    transient_theory_curve,
    UnstableConfiguration,
)
from lossy_diffusion.stability import mean_bounds, meansquare_bounds, spectral_check
from lossy_diffusion.mac import MacParams, bianchi_fixed_point, mac_error_model, simulate_backoff
from lossy_diffusion.montecarlo import run_diffusion, steady_state_estimate

__all__ = [
    "Topology", "build_from_adjacency", "random_geometric",
    "ErrorModel", "uniform_error_model", "sample_success_sets",
    "CombiningRule", "effective_degrees", "weights",
    "NodeProfile", "SpatialCorrelation", "TrueParameter",
    "scalar_coefficients", "weight_moments", "build_moment_system",
    "steady_state_msd", "mean_trajectory", "transient_theory_curve",
    "UnstableConfiguration",
    "mean_bounds", "meansquare_bounds", "spectral_check",
    "MacParams", "bianchi_fixed_point", "mac_error_model", "simulate_backoff",
    "run_diffusion", "steady_state_estimate",
]
