"""Numerical laboratory for discounted mean field games on the circle."""

from .equilibrium import (
    EquilibriumSolution,
    MaxDoublings,
    MaxIterationsExceeded,
    SolverConfig,
    extend_horizon,
    solve_limit_mckean_vlasov,
    solve_mfg_finite_horizon,
)
from .fokker_planck import SchemeError, heat_flow, solve_adjoint_rho, solve_fp_forward
from .grid import PeriodicGrid, Trajectory
from .hjb import HjbDiagnostics, hjb_diagnostics, solve_hjb_backward
from .metrics import sup_norm_diff, wasserstein1_grid, wasserstein1_particles
from .model import (
    CFLViolation,
    ConfigError,
    CouplingSpec,
    HamiltonianSpec,
    ProblemSpec,
    reference_spec,
    validate_assumptions,
)
from .particles import ParticleEnsemble, simulate_coupled_pair, simulate_particles

__all__ = [
    "CFLViolation", "ConfigError", "CouplingSpec", "EquilibriumSolution", "HamiltonianSpec",
    "HjbDiagnostics", "MaxDoublings", "MaxIterationsExceeded", "ParticleEnsemble", "PeriodicGrid",
    "ProblemSpec", "SchemeError", "SolverConfig", "Trajectory", "extend_horizon", "heat_flow",
    "hjb_diagnostics", "reference_spec", "simulate_coupled_pair", "simulate_particles",
    "solve_adjoint_rho", "solve_fp_forward", "solve_hjb_backward", "solve_limit_mckean_vlasov",
    "solve_mfg_finite_horizon", "sup_norm_diff", "validate_assumptions", "wasserstein1_grid",
    "wasserstein1_particles",
]
