"""
This package computes Tullock contest equilibria and the valuations a coordinator should report to its coalition.
"""

from .analysis import ContestAnalysis, VerificationReport
from .core import (
    AlphaSolution,
    ContestInstance,
    Equilibrium,
    Player,
    alpha_from_relative_costs,
    bids_from_alpha,
    coordinator_utility,
    equilibrium,
    solve_alpha,
    solve_alpha_bisection,
    three_player_equilibrium,
    utility,
)
from .design import (
    CoordinatorInstance,
    DesignResult,
    SweepRow,
    baseline_utility,
    design_general,
    design_three_player,
    excludes_opponent,
    feasibility_residual,
    interior_closed_form_applies,
    interior_optimum,
    solve_companion,
    solve_feasible_companion,
    sweep,
)
from .enums import (
    ExitCode,
    Regime,
    SolveMethod,
)
from .exceptions import (
    ClosedFormDomainError,
    ContestError,
    ConvergenceError,
    InfeasibleDesignError,
    InvalidCoalitionError,
    InvalidInstanceError,
    NoFeasibleCompanionError,
    SpecFileError,
    UndefinedShareError,
)
from .oracle import NashReport, best_response, br_fixed_point, verify_nash
from .spec_file import ContestSpecFile

__all__ = [
    "ContestAnalysis",
    "VerificationReport",
    "ContestSpecFile",
    "Player",
    "ContestInstance",
    "AlphaSolution",
    "Equilibrium",
    "alpha_from_relative_costs",
    "bids_from_alpha",
    "coordinator_utility",
    "equilibrium",
    "solve_alpha",
    "solve_alpha_bisection",
    "three_player_equilibrium",
    "utility",
    "NashReport",
    "best_response",
    "br_fixed_point",
    "verify_nash",
    "CoordinatorInstance",
    "DesignResult",
    "SweepRow",
    "baseline_utility",
    "design_general",
    "design_three_player",
    "excludes_opponent",
    "feasibility_residual",
    "interior_closed_form_applies",
    "interior_optimum",
    "solve_companion",
    "solve_feasible_companion",
    "sweep",
    "ExitCode",
    "Regime",
    "SolveMethod",
    "ContestError",
    "ClosedFormDomainError",
    "ConvergenceError",
    "InfeasibleDesignError",
    "InvalidCoalitionError",
    "InvalidInstanceError",
    "NoFeasibleCompanionError",
    "SpecFileError",
    "UndefinedShareError",
]
