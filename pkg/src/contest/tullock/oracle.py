import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from .core import ContestInstance, require_positive, utility
from .exceptions import ConvergenceError, InvalidInstanceError

logger = logging.getLogger(__name__)

ZERO_TOTAL_BID_FRACTION = 1e-12
FIXED_POINT_TOL = 1e-12
FIXED_POINT_MAX_ITER = 100_000
NASH_TOL = 1e-8
MIN_RELAXATION = 1e-4
GROWTH_LIMIT = 4.0
PATIENCE = 200
RECOVERY = 50


@dataclass(frozen=True)
class NashReport:
    """
    Largest payoff gain any single player could get by switching to its best response.

    Attributes:
        max_deviation_gain: Maximum of ``per_player_gain``.
        per_player_gain: Gain of each player, never below ``-tolerance``.
        tolerance: Gain accepted as numerical noise.
    """

    max_deviation_gain: float
    per_player_gain: tuple[float, ...]
    tolerance: float

    @property
    def is_nash(self) -> bool:
        return self.max_deviation_gain <= self.tolerance


def _best_response(valuation: float, cost: float, opponent_total: float) -> float:
    if opponent_total <= 0.0:
        return ZERO_TOTAL_BID_FRACTION * valuation / cost
    return max(math.sqrt(valuation * opponent_total / cost) - opponent_total, 0.0)


def best_response(valuation: float, cost: float, opponent_total: float) -> float:
    """
    Payoff-maximising bid against a fixed total of opponent bids.

    Solves the first-order condition ``v * S / (x + S)^2 = c`` and clips at zero:
    ``x = [sqrt(v * S / c) - S]^+``. Against ``S = 0`` any positive bid takes the whole
    prize and no maximiser exists, so a tiny bid of ``1e-12 * v / c`` stands in for it.

    Args:
        valuation: The player's valuation ``v > 0``.
        cost: The player's per-unit cost ``c > 0``.
        opponent_total: Sum of the other players' bids, ``S >= 0``.

    Returns:
        float: The best-response bid.

    Raises:
        InvalidInstanceError: If an argument is out of range.
    """
    valuation = require_positive("valuation", valuation)
    cost = require_positive("cost", cost)
    opponent_total = float(opponent_total)
    if not math.isfinite(opponent_total) or opponent_total < 0.0:
        msg = f"opponent_total must be finite and nonnegative, got {opponent_total}"
        raise InvalidInstanceError(msg)
    return _best_response(valuation, cost, opponent_total)


def _validated_start(instance: ContestInstance, initial_bids: ArrayLike) -> list[float]:
    start = np.asarray(initial_bids, dtype=float)
    if start.shape != (instance.n,):
        msg = f"Expected {instance.n} initial bids, got shape {start.shape}"
        raise InvalidInstanceError(msg)
    if not np.all(np.isfinite(start)) or np.any(start <= 0.0):
        msg = f"Initial bids must be finite and strictly positive, got {start.tolist()}"
        raise InvalidInstanceError(msg)
    return start.tolist()


def _largest_gap(valuations: list[float], costs: list[float], bids: list[float]) -> float:
    total = math.fsum(bids)
    return max(
        abs(_best_response(v, c, max(total - x, 0.0)) - x) for v, c, x in zip(valuations, costs, bids, strict=True)
    )


def br_fixed_point(
    instance: ContestInstance,
    initial_bids: ArrayLike,
    tol: float = FIXED_POINT_TOL,
    max_iter: int = FIXED_POINT_MAX_ITER,
) -> np.ndarray:
    """
    Iterate round-robin best responses until no player wants to move.

    Players update one at a time against the latest bids of the others, each move
    scaled by a relaxation factor. Plain round-robin overshoots when one player
    dominates, so the factor adapts to the gap ``max_i |BR_i - x_i|`` measured
    relative to the total bid before every sweep:

    - it is halved when the gap grows ``GROWTH_LIMIT``-fold or makes no progress for
      ``PATIENCE`` sweeps;
    - it is doubled again after a run of improving sweeps. If the larger step blows
      up, the bids go back to where the doubling started and the next attempt waits
      twice as long.

    A bid whose best response is zero drops to exactly zero once the damped step
    would leave it within ``tol`` of zero.

    Args:
        instance: The contest.
        initial_bids: Strictly positive starting bids.
        tol: Stop once ``max_i |BR_i - x_i| <= tol`` at the current bids.
        max_iter: Maximum number of sweeps.

    Returns:
        np.ndarray: The fixed-point bids.

    Raises:
        ConvergenceError: If the sweep budget runs out. The error carries the last
            iterate and its residual.
        InvalidInstanceError: If the start, tolerance or budget is invalid.
    """
    bids = _validated_start(instance, initial_bids)
    tol = require_positive("tol", tol)
    if isinstance(max_iter, bool) or not isinstance(max_iter, (int, np.integer)) or max_iter < 1:
        msg = f"max_iter must be a positive integer, got {max_iter!r}"
        raise InvalidInstanceError(msg)

    valuations = instance.valuations.tolist()
    costs = instance.costs.tolist()
    relaxation = 1.0
    best = math.inf
    stale = improved = 0
    patience = RECOVERY
    checkpoint: tuple[list[float], float, float] | None = None

    for sweep in range(1, int(max_iter) + 1):
        gap = _largest_gap(valuations, costs, bids)
        if gap <= tol:
            logger.debug("Best responses settled after %d sweeps (residual %.3g)", sweep - 1, gap)
            return np.array(bids)
        spread = gap / math.fsum(bids)

        if spread > GROWTH_LIMIT * best:
            stale = improved = 0
            if checkpoint is not None:
                overshot = relaxation
                saved, relaxation, best = checkpoint
                bids = list(saved)
                checkpoint = None
                patience *= 2
                logger.debug("Sweep %d: relaxation %g overshot, back to %g", sweep, overshot, relaxation)
                continue
            relaxation = max(relaxation / 2.0, MIN_RELAXATION)
            best = spread
            logger.debug("Sweep %d: relaxation lowered to %g (residual %.3g)", sweep, relaxation, gap)
        elif spread < best:
            best = spread
            stale = 0
            improved += 1
            if improved >= patience and relaxation < 1.0:
                checkpoint = (list(bids), relaxation, best)
                relaxation = min(2.0 * relaxation, 1.0)
                improved = 0
                logger.debug("Sweep %d: relaxation raised to %g (residual %.3g)", sweep, relaxation, gap)
        else:
            stale += 1
            if stale >= PATIENCE:
                relaxation = max(relaxation / 2.0, MIN_RELAXATION)
                best = spread
                stale = improved = 0
                checkpoint = None
                logger.debug("Sweep %d: relaxation lowered to %g after a stall (residual %.3g)", sweep, relaxation, gap)

        total = math.fsum(bids)
        for i, current in enumerate(bids):
            target = _best_response(valuations[i], costs[i], max(total - current, 0.0))
            updated = current + relaxation * (target - current)
            if target == 0.0 and updated <= tol:
                updated = 0.0
            total += updated - current
            bids[i] = updated

    residual = _largest_gap(valuations, costs, bids)
    if residual <= tol:
        return np.array(bids)
    msg = f"no-convergence: best responses still move by {residual:.3g} after {max_iter} sweeps"
    raise ConvergenceError(msg, np.array(bids), residual)


def verify_nash(
    instance: ContestInstance,
    bids: ArrayLike,
    tol: float = NASH_TOL,
) -> NashReport:
    """
    Measure how much each player could gain by deviating alone to its best response.

    Args:
        instance: The contest.
        bids: Nonnegative bid per player, not all zero.
        tol: Largest gain still reported as an equilibrium.

    Returns:
        NashReport: Gains per player and the verdict under ``tol``.

    Raises:
        UndefinedShareError: If every bid is zero.
    """
    tol = float(tol)
    if not math.isfinite(tol) or tol < 0.0:
        msg = f"tol must be finite and nonnegative, got {tol}"
        raise InvalidInstanceError(msg)

    x = np.asarray(bids, dtype=float)
    gains = []
    for i, player in enumerate(instance.players):
        current = utility(instance, x, i)
        others = math.fsum(np.delete(x, i).tolist())
        deviation = x.copy()
        deviation[i] = _best_response(player.valuation, player.cost, others)
        gains.append(utility(instance, deviation, i) - current)

    report = NashReport(max(gains), tuple(gains), tol)
    logger.debug("Max deviation gain %.3g (tolerance %g)", report.max_deviation_gain, tol)
    return report
