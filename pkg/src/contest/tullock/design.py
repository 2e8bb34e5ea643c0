import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike
from scipy import optimize

from .core import (
    ContestInstance,
    Player,
    alpha_from_relative_costs,
    bids_from_alpha,
    coordinator_utility,
    equilibrium,
    require_positive,
    validate_coalition,
)
from .enums import Regime
from .exceptions import (
    ClosedFormDomainError,
    InfeasibleDesignError,
    InvalidInstanceError,
    NoFeasibleCompanionError,
)

logger = logging.getLogger(__name__)

BETA_FLOOR = 1e-6
BETA_SPAN = 10.0
BETA_GRID_POINTS = 4096
BETA_EXPANSIONS = 4
BETA_XTOL = 1e-11
COMPANION_FLOOR = 1e-9
COMPANION_SCAN_POINTS = 128
COMPANION_EXPANSIONS = 8
FEASIBILITY_TOL = 1e-8
UTILITY_TIE_FRACTION = 1e-12


@dataclass(frozen=True)
class CoordinatorInstance:
    """
    A contest in which a coordinator reports valuations to a coalition of subordinates.

    The opponents keep their own valuations; the subordinates' valuations are the
    design variables, so only their costs are fixed. In the induced contest the
    opponents come first, followed by the subordinates in the given order.

    Attributes:
        opponents: Players outside the coalition.
        subordinate_costs: Per-unit cost of each coalition member.
        v_K: The coordinator's own valuation of the prize.
    """

    opponents: tuple[Player, ...]
    subordinate_costs: tuple[float, ...]
    v_K: float

    def __post_init__(self) -> None:
        opponents = tuple(self.opponents)
        costs = tuple(self.subordinate_costs)
        if not opponents or not costs:
            msg = (
                "A coordinator instance needs at least one opponent and one subordinate, "
                f"got {len(opponents)} and {len(costs)}"
            )
            raise InvalidInstanceError(msg)
        for index, player in enumerate(opponents):
            if not isinstance(player, Player):
                msg = f"opponents[{index}] must be a Player, got {type(player).__name__}"
                raise InvalidInstanceError(msg)
        costs = tuple(require_positive(f"subordinate_costs[{i}]", c) for i, c in enumerate(costs))
        object.__setattr__(self, "opponents", opponents)
        object.__setattr__(self, "subordinate_costs", costs)
        object.__setattr__(self, "v_K", require_positive("v_K", self.v_K))

    @classmethod
    def from_contest(
        cls, instance: ContestInstance, coalition: Iterable[int], v_K: float
    ) -> "CoordinatorInstance":
        """
        Split a contest into opponents and a coalition given by 0-based indices.

        The coalition members' valuations in ``instance`` are discarded.
        """
        members = validate_coalition(instance.n, coalition)
        opponents = tuple(p for i, p in enumerate(instance.players) if i not in members)
        costs = tuple(instance.players[i].cost for i in members)
        return cls(opponents, costs, v_K)

    @property
    def k(self) -> int:
        """Number of subordinates."""
        return len(self.subordinate_costs)

    @property
    def n(self) -> int:
        return len(self.opponents) + self.k

    @property
    def coalition(self) -> tuple[int, ...]:
        """0-based positions of the subordinates in the induced contest."""
        return tuple(range(len(self.opponents), self.n))

    @cached_property
    def opponent_relative_costs(self) -> np.ndarray:
        return np.array([p.relative_cost for p in self.opponents])

    @cached_property
    def sqrt_costs(self) -> np.ndarray:
        """Square roots of the subordinate costs."""
        return np.sqrt(np.array(self.subordinate_costs))

    def _validated_valuations(self, valuations: ArrayLike) -> np.ndarray:
        values = np.asarray(valuations, dtype=float)
        if values.shape != (self.k,):
            msg = f"Expected {self.k} subordinate valuations, got shape {values.shape}"
            raise InvalidInstanceError(msg)
        for i, value in enumerate(values.tolist()):
            require_positive(f"valuations[{i}]", value)
        return values

    def contest(self, valuations: ArrayLike) -> ContestInstance:
        """The full contest induced by reporting ``valuations`` to the subordinates."""
        values = self._validated_valuations(valuations)
        subordinates = tuple(Player(v, c) for v, c in zip(values.tolist(), self.subordinate_costs))
        return ContestInstance(self.opponents + subordinates)

    def relative_cost_rows(self, valuation_rows: np.ndarray) -> np.ndarray:
        """Relative costs of the induced contests, one row per row of subordinate valuations."""
        rows = valuation_rows.shape[0]
        opponents = np.broadcast_to(self.opponent_relative_costs, (rows, len(self.opponents)))
        return np.concatenate([opponents, np.array(self.subordinate_costs) / valuation_rows], axis=1)


@dataclass(frozen=True)
class DesignResult:
    """
    An optimal set of reported valuations and what they achieve.

    Attributes:
        valuations: Reported valuation per subordinate, ``beta * sqrt(c_i)``.
        beta: Common ratio of valuation to the square root of cost.
        alpha: Equilibrium total bid of the induced contest.
        coordinator_utility: Coordinator payoff at the induced equilibrium.
        regime: Whether the opponents are driven out entirely.
        feasibility_residual: Redistributed payments minus coordinator utility at equilibrium.
    """

    valuations: tuple[float, ...]
    beta: float
    alpha: float
    coordinator_utility: float
    regime: Regime
    feasibility_residual: float


@dataclass(frozen=True)
class SweepRow:
    """One point of the feasible segment; every field but ``v2`` is ``None`` when no companion exists."""

    v2: float
    v3: float | None
    coordinator_utility: float | None
    alpha: float | None

    @property
    def feasible(self) -> bool:
        return self.v3 is not None


def _residual_rows(coord: CoordinatorInstance, valuation_rows: np.ndarray) -> np.ndarray:
    w = coord.relative_cost_rows(valuation_rows)
    bids = bids_from_alpha(w, alpha_from_relative_costs(w))[:, len(coord.opponents) :]
    return ((valuation_rows - coord.v_K) * bids).sum(axis=1)


def feasibility_residual(coord: CoordinatorInstance, valuations: ArrayLike) -> float:
    """
    Validity gap of a valuation report at the induced equilibrium.

    Returns ``sum_{i in K} v_i x_i* - v_K * sum_{i in K} x_i*``: the payments promised
    to the subordinates minus what the coordinator collects. A valid report makes it zero.
    """
    values = coord._validated_valuations(valuations)
    bids = equilibrium(coord.contest(values)).bids[len(coord.opponents) :]
    return float(((values - coord.v_K) * bids).sum())


def _first_crossing(residuals: np.ndarray, sign: float) -> int | None:
    crossed = np.flatnonzero(sign * residuals <= 0.0)
    return int(crossed[0]) if crossed.size else None


def solve_companion(coord: CoordinatorInstance, valuations: ArrayLike, position: int) -> float:
    """
    Valuation for one subordinate that makes a report valid, the others held fixed.

    The valid reports form two branches; the one returned passes through the
    identity point ``v_i = v_K``. Starting from ``v_K`` the search moves down when the
    others are over-reported and up otherwise, scans a geometric grid for the first
    sign change of the residual and polishes it with Brent's method.

    Args:
        coord: The coordinator instance.
        valuations: Subordinate valuations; the entry at ``position`` is ignored.
        position: 0-based index of the free subordinate.

    Returns:
        float: The companion valuation.

    Raises:
        NoFeasibleCompanionError: If no sign change is found.
    """
    if isinstance(position, bool) or not isinstance(position, (int, np.integer)) or not 0 <= position < coord.k:
        msg = f"Subordinate position {position!r} out of range for {coord.k} subordinates"
        raise InvalidInstanceError(msg)
    base = np.asarray(valuations, dtype=float).copy()
    base[position] = coord.v_K
    base = coord._validated_valuations(base)
    v_K = coord.v_K

    def residuals(candidates: np.ndarray) -> np.ndarray:
        rows = np.repeat(base[None, :], candidates.size, axis=0)
        rows[:, position] = candidates
        return _residual_rows(coord, rows)

    def residual(candidate: float) -> float:
        return float(residuals(np.array([candidate]))[0])

    at_identity = residual(v_K)
    if at_identity == 0.0:
        return v_K

    if at_identity > 0.0:
        scans = [np.geomspace(v_K, COMPANION_FLOOR * v_K, COMPANION_SCAN_POINTS)]
    else:
        others = np.delete(base, position)
        upper = 10.0 * v_K * max(1.0, float(others.max(initial=v_K)) / v_K)
        scans = [np.geomspace(v_K, upper, COMPANION_SCAN_POINTS)]
        for _ in range(COMPANION_EXPANSIONS):
            scans.append(np.geomspace(upper, 2.0 * upper, COMPANION_SCAN_POINTS))
            upper *= 2.0

    sign = math.copysign(1.0, at_identity)
    previous = v_K
    for grid in scans:
        values = residuals(grid)
        hit = _first_crossing(values, sign)
        if hit is None:
            previous = float(grid[-1])
            logger.debug("No companion up to %g", previous)
            continue
        if values[hit] == 0.0:
            return float(grid[hit])
        lower, upper = sorted((float(grid[hit - 1]) if hit else previous, float(grid[hit])))
        return float(optimize.brentq(residual, lower, upper, xtol=1e-14, rtol=1e-15))

    msg = (
        f"no-feasible-companion: no valid valuation for subordinate {position} "
        f"between {min(v_K, previous):.6g} and {max(v_K, previous):.6g}"
    )
    raise NoFeasibleCompanionError(msg)


def _require_two_subordinates(coord: CoordinatorInstance) -> None:
    if coord.k != 2:
        msg = f"Need exactly 2 subordinates, got {coord.k}"
        raise InvalidInstanceError(msg)


def solve_feasible_companion(coord: CoordinatorInstance, v2: float) -> float:
    """Valuation of the second subordinate that keeps the report valid given the first one's ``v2``."""
    _require_two_subordinates(coord)
    v2 = require_positive("v2", v2)
    return solve_companion(coord, (v2, coord.v_K), 1)


def sweep(coord: CoordinatorInstance, v2_grid: Sequence[float]) -> list[SweepRow]:
    """
    Walk the feasible segment over a grid of first-subordinate valuations.

    Grid points without a valid companion produce a row of missing values instead of
    an error.
    """
    _require_two_subordinates(coord)
    grid = [require_positive(f"v2_grid[{i}]", v) for i, v in enumerate(v2_grid)]
    if not grid:
        msg = "v2_grid must not be empty"
        raise InvalidInstanceError(msg)

    rows = []
    for v2 in grid:
        try:
            v3 = solve_feasible_companion(coord, v2)
        except NoFeasibleCompanionError:
            logger.info("No feasible companion for v2=%g", v2)
            rows.append(SweepRow(v2, None, None, None))
            continue
        instance = coord.contest((v2, v3))
        eq = equilibrium(instance)
        payoff = coordinator_utility(instance, coord.coalition, coord.v_K, eq.bids)
        rows.append(SweepRow(v2, v3, payoff, eq.alpha))
    return rows


def baseline_utility(coord: CoordinatorInstance) -> float:
    """Coordinator payoff when every subordinate is told the coordinator's own valuation."""
    instance = coord.contest(np.full(coord.k, coord.v_K))
    return coordinator_utility(instance, coord.coalition, coord.v_K, equilibrium(instance).bids)


def _design_result(coord: CoordinatorInstance, beta: float, regime: Regime | None = None) -> DesignResult:
    valuations = beta * coord.sqrt_costs
    instance = coord.contest(valuations)
    eq = equilibrium(instance)
    payoff = coordinator_utility(instance, coord.coalition, coord.v_K, eq.bids)
    residual = float(((valuations - coord.v_K) * eq.bids[len(coord.opponents) :]).sum())
    if abs(residual) > FEASIBILITY_TOL * max(coord.v_K, 1.0):
        logger.warning("Design at beta=%.17g misses validity by %.3g", beta, residual)
    if regime is None:
        excluded = not eq.active[: len(coord.opponents)].any()
        regime = Regime.OPPONENT_EXCLUDED if excluded else Regime.INTERIOR
    return DesignResult(tuple(valuations.tolist()), beta, eq.alpha, payoff, regime, residual)


def _require_three_players(coord: CoordinatorInstance) -> None:
    if len(coord.opponents) != 1 or coord.k != 2:
        msg = (
            "Three-player design needs 1 opponent and 2 subordinates, "
            f"got {len(coord.opponents)} and {coord.k}"
        )
        raise InvalidInstanceError(msg)


def excludes_opponent(coord: CoordinatorInstance) -> bool:
    """Whether the coordinator can shut the single opponent out: ``v_K * c1 / v1 >= 2 sqrt(c2 c3)``."""
    _require_three_players(coord)
    c2, c3 = coord.subordinate_costs
    return coord.v_K * coord.opponents[0].relative_cost >= 2.0 * math.sqrt(c2 * c3)


def interior_optimum(coord: CoordinatorInstance) -> tuple[float, float]:
    """
    Closed-form ``(beta, U_K)`` of the three-player design when the opponent keeps bidding.

    With ``w1 = c1 / v1``::

        beta = (2 v_K w1 + (sqrt(c2) - sqrt(c3))^2) / (w1 (sqrt(c2) + sqrt(c3)))
        U_K  = v_K (2 v_K w1 + (sqrt(c2) - sqrt(c3))^2) / (v_K w1 + c2 + c3)

    At ``v_K w1 = 2 sqrt(c2 c3)`` the utility reaches ``v_K``.
    """
    _require_three_players(coord)
    c2, c3 = coord.subordinate_costs
    s2, s3 = math.sqrt(c2), math.sqrt(c3)
    w1 = coord.opponents[0].relative_cost
    v_K = coord.v_K
    numerator = 2.0 * v_K * w1 + (s2 - s3) ** 2
    return numerator / (w1 * (s2 + s3)), v_K * numerator / (v_K * w1 + c2 + c3)


def interior_closed_form_applies(coord: CoordinatorInstance) -> bool:
    """
    Whether the interior closed form keeps all three players active.

    The costlier subordinate stays in only while
    ``v_K * c1 / v1 >= sqrt(c_min) * (sqrt(c_max) - sqrt(c_min))``.
    """
    _require_three_players(coord)
    low, high = sorted(coord.sqrt_costs.tolist())
    return coord.v_K * coord.opponents[0].relative_cost >= low * (high - low)


def design_three_player(coord: CoordinatorInstance) -> DesignResult:
    """
    Optimal valuations for one opponent and two subordinates in closed form.

    When the coordinator can exclude the opponent it wins the whole prize; the reported
    valuations are then the witness ``beta = v_K (sqrt(c2) + sqrt(c3)) / (2 sqrt(c2 c3))``
    out of the continuum of optima. Otherwise the interior formulas apply.

    Raises:
        InvalidInstanceError: If the instance is not one opponent plus two subordinates.
        ClosedFormDomainError: If the interior formulas would push a subordinate out, in
            which case ``design_general`` has to be used.
    """
    _require_three_players(coord)
    if excludes_opponent(coord):
        c2, c3 = coord.subordinate_costs
        beta = coord.v_K * (math.sqrt(c2) + math.sqrt(c3)) / (2.0 * math.sqrt(c2 * c3))
        logger.debug("Opponent excluded, witness beta=%.17g", beta)
        return _design_result(coord, beta, Regime.OPPONENT_EXCLUDED)

    if not interior_closed_form_applies(coord):
        msg = "Interior closed form leaves a subordinate inactive for this instance"
        raise ClosedFormDomainError(msg)

    beta, _ = interior_optimum(coord)
    logger.debug("Interior optimum at beta=%.17g", beta)
    return _design_result(coord, beta, Regime.INTERIOR)


def _reduced_constraint(coord: CoordinatorInstance, betas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Validity constraint of the reduced program on a grid of ``beta``.

    Returns ``g(beta) = sum_{k in K} (beta sqrt(c_k) - v_K) [beta - alpha sqrt(c_k)]^+`` and
    whether any subordinate bids, where ``alpha`` solves the induced contest.
    """
    sqrt_costs = coord.sqrt_costs
    w = coord.relative_cost_rows(betas[:, None] * sqrt_costs[None, :])
    alpha = alpha_from_relative_costs(w)
    margin = np.maximum(betas[:, None] - alpha[:, None] * sqrt_costs[None, :], 0.0)
    g = ((betas[:, None] * sqrt_costs[None, :] - coord.v_K) * margin).sum(axis=1)
    return g, (margin > 0.0).any(axis=1)


def design_general(coord: CoordinatorInstance) -> DesignResult:
    """
    Optimal valuations for any number of opponents and subordinates.

    Valuations are restricted to ``v_i = beta * sqrt(c_i)``, which leaves ``beta`` as the
    only unknown. The validity constraint is scanned over a geometric ``beta`` grid, every
    sign change is polished by bisection, and the root with the highest coordinator
    utility wins (ties go to the smaller ``beta``). Roots at which no subordinate bids are
    discarded.

    Returns:
        DesignResult: Regime is ``OPPONENT_EXCLUDED`` when no opponent bids at the optimum.

    Raises:
        InfeasibleDesignError: If no usable root is found ("no-feasible-beta").
    """
    v_K = coord.v_K
    sqrt_costs = coord.sqrt_costs
    lower = BETA_FLOOR * v_K
    upper = BETA_SPAN * v_K * float(sqrt_costs.max() / sqrt_costs.min())

    def constraint(beta: float) -> float:
        return float(_reduced_constraint(coord, np.array([beta]))[0][0])

    for _ in range(BETA_EXPANSIONS):
        if constraint(upper) > 0.0:
            break
        upper *= 2.0
        logger.debug("Expanding beta scan to %g", upper)

    betas = np.geomspace(lower, upper, BETA_GRID_POINTS)
    g, bidding = _reduced_constraint(coord, betas)

    roots = [float(b) for b in betas[(g == 0.0) & bidding]]
    for j in np.flatnonzero(g[:-1] * g[1:] < 0.0):
        roots.append(optimize.bisect(constraint, float(betas[j]), float(betas[j + 1]), xtol=BETA_XTOL))
    roots.sort()
    logger.debug("Found %d candidate beta roots: %s", len(roots), roots)

    best: DesignResult | None = None
    for beta in roots:
        result = _design_result(coord, beta)
        if result.coordinator_utility <= 0.0:
            continue
        if best is None or result.coordinator_utility > best.coordinator_utility + UTILITY_TIE_FRACTION * v_K:
            best = result

    if best is None:
        msg = f"no-feasible-beta: no valid beta in [{lower:.6g}, {upper:.6g}]"
        raise InfeasibleDesignError(msg)
    return best
