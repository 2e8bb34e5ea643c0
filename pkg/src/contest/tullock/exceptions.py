import numpy as np


class ContestError(Exception):
    """Base exception for all contest-related errors."""


class InvalidInstanceError(ContestError, ValueError):
    """Raised when a player, contest or coordinator instance fails validation."""


class InvalidCoalitionError(InvalidInstanceError):
    """Raised when a coalition is empty, out of range, or covers every player."""


class UndefinedShareError(ContestError, ZeroDivisionError):
    """Raised when a prize share is requested at the all-zero bid profile."""


class ConvergenceError(ContestError, ArithmeticError):
    """
    Raised when best-response iteration exhausts its sweep budget.

    The last iterate and its fixed-point residual are kept so the caller can
    inspect how far the iteration got.
    """

    def __init__(self, msg: str, last_iterate: np.ndarray, residual: float) -> None:
        super().__init__(msg)
        self.last_iterate = last_iterate
        self.residual = residual


class InfeasibleDesignError(ContestError):
    """Raised when no valid valuation design can be located."""


class NoFeasibleCompanionError(InfeasibleDesignError):
    """Raised when no companion valuation restores the validity constraint."""


class ClosedFormDomainError(InfeasibleDesignError):
    """Raised when the three-player closed form falls outside its all-active region."""


class SpecFileError(ContestError, ValueError):
    """Raised when a contest spec file cannot be parsed or validated."""

    def __init__(self, key: str, msg: str) -> None:
        super().__init__(msg)
        self.key = key
