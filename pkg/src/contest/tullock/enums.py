from enum import Enum, IntEnum


class SolveMethod(Enum):
    """Path used to compute the equilibrium total bid."""

    CUTOFF = "cutoff"
    BISECTION = "bisection"


class Regime(Enum):
    """
    Shape of an optimal coordinator design.
    """

    OPPONENT_EXCLUDED = "opponent-excluded"
    INTERIOR = "interior"


class ExitCode(IntEnum):
    """
    Process exit status of the command-line front end.
    """

    SUCCESS = 0
    VERIFICATION_FAILED = 1
    INPUT_ERROR = 2
    NO_CONVERGENCE = 3
    INFEASIBLE_DESIGN = 4
