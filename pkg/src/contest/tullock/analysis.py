import logging
from dataclasses import dataclass

import numpy as np

from .core import ContestInstance, Equilibrium, equilibrium
from .design import (
    CoordinatorInstance,
    DesignResult,
    SweepRow,
    baseline_utility,
    design_general,
    design_three_player,
    sweep,
)
from .exceptions import ClosedFormDomainError, InvalidInstanceError
from .oracle import FIXED_POINT_MAX_ITER, FIXED_POINT_TOL, NASH_TOL, NashReport, br_fixed_point, verify_nash
from .spec_file import ContestSpecFile

logger = logging.getLogger(__name__)

AGREEMENT_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class VerificationReport:
    """
    Outcome of checking the closed-form equilibrium against best-response dynamics.

    Attributes:
        nash: Deviation gains at the closed-form equilibrium.
        fixed_point: Bids reached by best-response iteration.
        agreement: Max-norm distance between ``fixed_point`` and the closed-form bids.
        agreement_tol: Largest distance still accepted.
    """

    nash: NashReport
    fixed_point: np.ndarray
    agreement: float
    agreement_tol: float

    @property
    def passed(self) -> bool:
        return self.nash.is_nash and self.agreement <= self.agreement_tol


class ContestAnalysis:
    """
    Every computation the command line offers, for one contest.
    """

    def __init__(self, instance: ContestInstance, coordinator: CoordinatorInstance | None = None) -> None:
        """
        Initialize the ContestAnalysis object.

        Args:
            instance (ContestInstance): The contest to analyse.
            coordinator (CoordinatorInstance | None): Coalition split for design commands.
        """
        self._instance = self._validate_instance(instance)
        self._coordinator = self._validate_coordinator(coordinator)
        self._equilibrium: Equilibrium | None = None
        self._baseline: float | None = None
        self._designs: dict[bool, DesignResult] = {}

    @classmethod
    def from_spec(cls, spec: ContestSpecFile) -> "ContestAnalysis":
        coordinator = spec.coordinator() if spec.has_coordinator else None
        return cls(spec.contest(), coordinator)

    def _validate_instance(self, instance: ContestInstance) -> ContestInstance:
        if not isinstance(instance, ContestInstance):
            raise TypeError(f"Invalid instance type: '{type(instance).__name__}'. Instance must be a 'ContestInstance'.")
        return instance

    def _validate_coordinator(self, coordinator: CoordinatorInstance | None) -> CoordinatorInstance | None:
        if coordinator is not None and not isinstance(coordinator, CoordinatorInstance):
            raise TypeError(
                f"Invalid coordinator type: '{type(coordinator).__name__}'. Coordinator must be a 'CoordinatorInstance'."
            )
        return coordinator

    @property
    def instance(self) -> ContestInstance:
        return self._instance

    @property
    def coordinator(self) -> CoordinatorInstance:
        """The coordinator split, required by the design commands."""
        if self._coordinator is None:
            msg = "This contest has no coalition and v_K"
            raise InvalidInstanceError(msg)
        return self._coordinator

    @property
    def equilibrium(self) -> Equilibrium:
        """Closed-form equilibrium, computed once."""
        if self._equilibrium is None:
            self._equilibrium = equilibrium(self._instance)
        return self._equilibrium

    @property
    def baseline_utility(self) -> float:
        """Coordinator payoff when every subordinate is told ``v_K``."""
        if self._baseline is None:
            self._baseline = baseline_utility(self.coordinator)
        return self._baseline

    def default_start(self) -> np.ndarray:
        """Interior starting bids ``v_i / (2 c_i n)``."""
        return self._instance.valuations / (2.0 * self._instance.costs * self._instance.n)

    def verify(
        self,
        tol: float = NASH_TOL,
        fixed_point_tol: float = FIXED_POINT_TOL,
        max_iter: int = FIXED_POINT_MAX_ITER,
        agreement_tol: float = AGREEMENT_TOL,
    ) -> VerificationReport:
        """
        Check the closed form twice: against unilateral deviations and against best-response dynamics.

        Raises:
            ConvergenceError: If best-response iteration does not settle.
        """
        fixed_point = br_fixed_point(self._instance, self.default_start(), tol=fixed_point_tol, max_iter=max_iter)
        nash = verify_nash(self._instance, self.equilibrium.bids, tol=tol)
        agreement = float(np.abs(fixed_point - self.equilibrium.bids).max())
        return VerificationReport(nash, fixed_point, agreement, agreement_tol)

    def design(self, force_general: bool = False) -> DesignResult:
        """
        Optimal coordinator design.

        The closed form is used for one opponent and two subordinates unless
        ``force_general`` is set or the closed form does not apply.
        """
        if force_general not in self._designs:
            coord = self.coordinator
            result = None
            if not force_general and len(coord.opponents) == 1 and coord.k == 2:
                try:
                    result = design_three_player(coord)
                except ClosedFormDomainError:
                    logger.info("Closed form does not apply, falling back to the general solver")
            if result is None:
                result = design_general(coord)
            self._designs[force_general] = result
        return self._designs[force_general]

    def sweep(self, v2_min: float, v2_max: float, points: int) -> list[SweepRow]:
        """Feasible-segment sweep over ``points`` evenly spaced values of ``v2``."""
        if isinstance(points, bool) or not isinstance(points, int) or points < 2:
            msg = f"points must be an integer >= 2, got {points!r}"
            raise InvalidInstanceError(msg)
        if not 0 < v2_min < v2_max:
            msg = f"Need 0 < v2_min < v2_max, got [{v2_min}, {v2_max}]"
            raise InvalidInstanceError(msg)
        return sweep(self.coordinator, np.linspace(v2_min, v2_max, points).tolist())
