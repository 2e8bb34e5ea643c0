import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike
from scipy import optimize

from .enums import SolveMethod
from .exceptions import (
    InvalidCoalitionError,
    InvalidInstanceError,
    UndefinedShareError,
)

logger = logging.getLogger(__name__)

BISECTION_XTOL = 1e-12
BISECTION_MAX_ITER = 200
ALPHA_TOLERANCE = 1e-10


def require_positive(name: str, value: object) -> float:
    """Coerce ``value`` to a strictly positive finite float or raise."""
    if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
        msg = f"{name} must be a real number, got {type(value).__name__}"
        raise InvalidInstanceError(msg)
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        msg = f"{name} must be positive and finite, got {value}"
        raise InvalidInstanceError(msg)
    return value


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class Player:
    """A contestant: how much the prize is worth to it and what each unit of bid costs."""

    valuation: float
    cost: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "valuation", require_positive("valuation", self.valuation))
        object.__setattr__(self, "cost", require_positive("cost", self.cost))
        require_positive("relative cost", self.cost / self.valuation)

    @property
    def relative_cost(self) -> float:
        """Cost per unit of bid relative to the valuation, ``c / v``."""
        return self.cost / self.valuation

    @property
    def ratio(self) -> float:
        """Valuation per unit cost, ``v / c``; players bid only while the total stays below it."""
        return self.valuation / self.cost


@dataclass(frozen=True)
class ContestInstance:
    """
    A validated n-player Tullock contest.

    Player identity is the position in ``players``; every result vector is
    indexed the same way.
    """

    players: tuple[Player, ...]

    def __post_init__(self) -> None:
        players = tuple(self.players)
        if len(players) < 2:
            msg = f"A contest needs at least 2 players, got {len(players)}"
            raise InvalidInstanceError(msg)
        for index, player in enumerate(players):
            if not isinstance(player, Player):
                msg = f"players[{index}] must be a Player, got {type(player).__name__}"
                raise InvalidInstanceError(msg)
        object.__setattr__(self, "players", players)

    @classmethod
    def from_arrays(cls, valuations: ArrayLike, costs: ArrayLike) -> "ContestInstance":
        """Build an instance from parallel valuation and cost sequences."""
        valuations = np.asarray(valuations, dtype=float).ravel()
        costs = np.asarray(costs, dtype=float).ravel()
        if valuations.shape != costs.shape:
            msg = f"Got {valuations.size} valuations but {costs.size} costs"
            raise InvalidInstanceError(msg)
        return cls(tuple(Player(float(v), float(c)) for v, c in zip(valuations, costs)))

    @property
    def n(self) -> int:
        return len(self.players)

    @cached_property
    def valuations(self) -> np.ndarray:
        return _frozen(np.array([p.valuation for p in self.players]))

    @cached_property
    def costs(self) -> np.ndarray:
        return _frozen(np.array([p.cost for p in self.players]))

    @cached_property
    def relative_costs(self) -> np.ndarray:
        return _frozen(self.costs / self.valuations)

    def permuted(self, order: Sequence[int]) -> "ContestInstance":
        """Return the contest with players rearranged so that new position ``k`` holds ``order[k]``."""
        if sorted(order) != list(range(self.n)):
            msg = f"Order {list(order)} is not a permutation of {self.n} players"
            raise InvalidInstanceError(msg)
        return ContestInstance(tuple(self.players[k] for k in order))

    def with_player(self, index: int, player: Player) -> "ContestInstance":
        """Return the contest with the player at ``index`` replaced."""
        index = validate_index(self, index)
        players = list(self.players)
        players[index] = player
        return ContestInstance(tuple(players))


@dataclass(frozen=True)
class AlphaSolution:
    """
    The equilibrium total bid together with the participation cutoff.

    Attributes:
        alpha: Equilibrium total bid, the root of ``sum_i [1 - w_i * alpha]^+ = 1``.
        cutoff_index: 1-based position, in ratio-sorted order, of the first active
            player. Positions before it abstain; ``1`` means everybody bids.
        sorted_order: Original player indices sorted by ``v / c`` ascending (ties
            keep their original order).
    """

    alpha: float
    cutoff_index: int
    sorted_order: tuple[int, ...]

    @property
    def active_positions(self) -> tuple[int, ...]:
        """Original indices of the players that bid, in ratio-sorted order."""
        return self.sorted_order[self.cutoff_index - 1 :]

    @property
    def inactive_positions(self) -> tuple[int, ...]:
        return self.sorted_order[: self.cutoff_index - 1]


@dataclass(frozen=True, eq=False)
class Equilibrium:
    """
    Equilibrium bids and payoffs of a contest.

    Attributes:
        alpha_solution: Total bid and participation cutoff.
        bids: Equilibrium bid per player.
        payoffs: ``[v_i - c_i * alpha]^+``, the value of the prize share each player
            wins (``v_i * x_i / alpha``), before bid costs.
        net_payoffs: Share value minus bid cost, ``v_i * [1 - w_i * alpha]^2`` for active
            players; this is what ``utility`` returns at ``bids``.
    """

    alpha_solution: AlphaSolution
    bids: np.ndarray
    payoffs: np.ndarray
    net_payoffs: np.ndarray

    @property
    def alpha(self) -> float:
        return self.alpha_solution.alpha

    @property
    def active(self) -> np.ndarray:
        """Boolean mask of players with a strictly positive bid."""
        return self.bids > 0.0

    @property
    def total_bid(self) -> float:
        return float(self.bids.sum())


def _cutoff_scan(relative_costs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Sort-and-scan solution of the total-bid equation along the last axis.

    Players are ordered by relative cost descending (ratio ``v / c`` ascending). For a
    candidate first active position ``p`` the active set is ``p..n-1`` and the total
    bid is ``(n - p - 1) / sum(w[p:])``; the smallest ``p`` with
    ``(n - p - 1) * w[p] <= sum(w[p:])`` is the one that solves the equation.
    """
    n = relative_costs.shape[-1]
    order = np.argsort(-relative_costs, axis=-1, kind="stable")
    ordered = np.take_along_axis(relative_costs, order, axis=-1)
    tail_sums = np.cumsum(ordered[..., ::-1], axis=-1)[..., ::-1]
    others = np.arange(n - 1, -1, -1)
    qualifies = others * ordered <= tail_sums
    # A lone bidder cannot sustain a positive total.
    qualifies[..., -1] = False
    start = np.asarray(np.argmax(qualifies, axis=-1))
    alpha = np.take(others, start) / np.take_along_axis(tail_sums, start[..., None], axis=-1)[..., 0]
    return alpha, order


def alpha_from_relative_costs(relative_costs: ArrayLike) -> np.ndarray:
    """
    Equilibrium total bid for every row of relative costs.

    Args:
        relative_costs: Array of shape ``(..., n)`` with ``n >= 2`` strictly positive
            entries ``c_i / v_i`` per row.

    Returns:
        Array of shape ``(...)`` holding one total bid per row.

    Raises:
        InvalidInstanceError: If a row has fewer than two players.
    """
    w = np.asarray(relative_costs, dtype=float)
    if w.ndim == 0 or w.shape[-1] < 2:
        msg = f"Relative costs need at least 2 players per row, got shape {w.shape}"
        raise InvalidInstanceError(msg)
    alpha, _ = _cutoff_scan(w)
    return alpha


def bids_from_alpha(relative_costs: ArrayLike, alpha: ArrayLike) -> np.ndarray:
    """Equilibrium bids ``alpha * [1 - w_i * alpha]^+`` for matching rows of ``w`` and ``alpha``."""
    w = np.asarray(relative_costs, dtype=float)
    a = np.asarray(alpha, dtype=float)[..., None]
    return a * np.maximum(1.0 - w * a, 0.0)


def solve_alpha_bisection(
    instance: ContestInstance,
    xtol: float = BISECTION_XTOL,
    maxiter: int = BISECTION_MAX_ITER,
) -> float:
    """
    Solve for the equilibrium total bid by bisection.

    The excess ``f(alpha) = sum_i [1 - w_i * alpha]^+ - 1`` equals ``n - 1`` at zero
    and ``-1`` at ``max_i v_i / c_i``, so the bracket always holds a root. This path
    shares nothing with the cutoff scan and serves to cross-check it.
    """
    w = instance.relative_costs

    def excess(alpha: float) -> float:
        return float(np.maximum(1.0 - w * alpha, 0.0).sum()) - 1.0

    upper = float((instance.valuations / instance.costs).max())
    return optimize.bisect(excess, 0.0, upper, xtol=xtol, maxiter=maxiter)


def solve_alpha(
    instance: ContestInstance,
    method: SolveMethod = SolveMethod.CUTOFF,
) -> AlphaSolution:
    """
    Compute the equilibrium total bid and the set of abstaining players.

    Args:
        instance: The contest.
        method: ``SolveMethod.CUTOFF`` (closed form after sorting by ``v / c``) or
            ``SolveMethod.BISECTION``. Both classify players identically.

    Returns:
        AlphaSolution: Total bid, 1-based cutoff position and the ratio-sorted order.
        A player with ``w_i * alpha >= 1`` is classified inactive.
    """
    w = instance.relative_costs
    alpha, order = _cutoff_scan(w)
    alpha = float(alpha)
    if method is SolveMethod.BISECTION:
        alpha = solve_alpha_bisection(instance)

    inactive = w[order] * alpha >= 1.0
    cutoff_index = int(np.count_nonzero(inactive)) + 1
    logger.debug(
        "alpha=%.17g via %s, cutoff_index=%d of %d", alpha, method.value, cutoff_index, instance.n
    )
    return AlphaSolution(alpha, cutoff_index, tuple(int(k) for k in order))


def _equilibrium_from(instance: ContestInstance, solution: AlphaSolution, bids: np.ndarray, payoffs: np.ndarray) -> Equilibrium:
    shares = np.maximum(1.0 - instance.relative_costs * solution.alpha, 0.0)
    return Equilibrium(solution, _frozen(bids), _frozen(payoffs), _frozen(payoffs * shares))


def equilibrium(
    instance: ContestInstance,
    method: SolveMethod = SolveMethod.CUTOFF,
) -> Equilibrium:
    """
    Closed-form Nash equilibrium of the contest.

    Bids are ``x_i = alpha * [1 - w_i * alpha]^+`` and payoffs ``U_i = [v_i - c_i * alpha]^+``;
    ``net_payoffs`` subtracts the bid cost from the latter.

    Returns:
        Equilibrium: Bids and payoffs indexed like ``instance.players``.
    """
    solution = solve_alpha(instance, method)
    bids = bids_from_alpha(instance.relative_costs, solution.alpha)
    payoffs = np.maximum(instance.valuations - instance.costs * solution.alpha, 0.0)
    return _equilibrium_from(instance, solution, bids, payoffs)


def three_player_equilibrium(instance: ContestInstance) -> Equilibrium:
    """
    Equilibrium of a three-player contest from its explicit formulas.

    The player with the largest relative cost abstains when its relative cost is at
    least the sum of the other two; otherwise all three bid
    ``(2W - 4w_i) / W^2`` with ``W = w_1 + w_2 + w_3``.

    Raises:
        InvalidInstanceError: If the contest does not have exactly three players.
    """
    if instance.n != 3:
        msg = f"Three-player formulas need exactly 3 players, got {instance.n}"
        raise InvalidInstanceError(msg)

    v, c, w = instance.valuations, instance.costs, instance.relative_costs
    order = np.argsort(-w, kind="stable")
    weakest, a, b = (int(k) for k in order)
    bids = np.zeros(3)
    payoffs = np.zeros(3)

    if w[weakest] >= w[a] + w[b]:
        pair = w[a] + w[b]
        bids[a] = w[b] / pair**2
        bids[b] = w[a] / pair**2
        payoffs[a] = v[a] * w[b] / pair
        payoffs[b] = v[b] * w[a] / pair
        solution = AlphaSolution(1.0 / pair, 2, (weakest, a, b))
    else:
        total = w.sum()
        bids[:] = (2.0 * total - 4.0 * w) / total**2
        payoffs[:] = v - 2.0 * c / total
        solution = AlphaSolution(2.0 / total, 1, (weakest, a, b))

    return _equilibrium_from(instance, solution, bids, payoffs)


def validate_index(instance: ContestInstance, index: int) -> int:
    """Check that ``index`` names a player of ``instance`` (0-based)."""
    if isinstance(index, bool) or not isinstance(index, (int, np.integer)):
        msg = f"Player index must be an integer, got {type(index).__name__}"
        raise InvalidInstanceError(msg)
    if not 0 <= index < instance.n:
        msg = f"Player index {index} out of range for {instance.n} players"
        raise InvalidInstanceError(msg)
    return int(index)


def validate_coalition(n: int, coalition: Iterable[int]) -> tuple[int, ...]:
    """
    Normalise a coalition of 0-based player indices.

    Returns:
        The sorted, de-duplicated member indices.

    Raises:
        InvalidCoalitionError: If the coalition is empty, repeats or misses an index,
            or contains every player.
    """
    members = list(coalition)
    for member in members:
        if isinstance(member, bool) or not isinstance(member, (int, np.integer)) or not 0 <= member < n:
            msg = f"invalid-coalition: member {member!r} is not a player index in 0..{n - 1}"
            raise InvalidCoalitionError(msg)
    unique = sorted({int(m) for m in members})
    if len(unique) != len(members):
        msg = f"invalid-coalition: repeated members in {members}"
        raise InvalidCoalitionError(msg)
    if not unique or len(unique) == n:
        msg = f"invalid-coalition: must be a nonempty strict subset of {n} players, got {members}"
        raise InvalidCoalitionError(msg)
    return tuple(unique)


def _validated_bids(instance: ContestInstance, bids: ArrayLike) -> tuple[np.ndarray, float]:
    x = np.asarray(bids, dtype=float)
    if x.shape != (instance.n,):
        msg = f"Expected {instance.n} bids, got shape {x.shape}"
        raise InvalidInstanceError(msg)
    if not np.all(np.isfinite(x)) or np.any(x < 0.0):
        msg = f"Bids must be finite and nonnegative, got {x.tolist()}"
        raise InvalidInstanceError(msg)
    total = float(x.sum())
    if total == 0.0:
        msg = "undefined-share: every bid is zero"
        raise UndefinedShareError(msg)
    return x, total


def utility(instance: ContestInstance, bids: ArrayLike, i: int) -> float:
    """
    Payoff of player ``i`` at a bid profile: ``v_i * x_i / sum(x) - c_i * x_i``.

    Args:
        instance: The contest.
        bids: Nonnegative bid per player, not all zero.
        i: 0-based player index.

    Returns:
        float: The payoff, which may be negative.

    Raises:
        UndefinedShareError: If every bid is zero.
        InvalidInstanceError: If ``i`` or the bid vector is invalid.
    """
    i = validate_index(instance, i)
    x, total = _validated_bids(instance, bids)
    player = instance.players[i]
    return player.valuation * x[i] / total - player.cost * x[i]


def coordinator_utility(
    instance: ContestInstance,
    coalition: Iterable[int],
    v_K: float,
    bids: ArrayLike,
) -> float:
    """
    Coordinator payoff ``v_K * sum_{i in K} x_i / sum_j x_j``.

    Args:
        instance: The contest.
        coalition: 0-based indices of the subordinate players.
        v_K: Coordinator valuation of the prize.
        bids: Nonnegative bid per player, not all zero.

    Returns:
        float: A value in ``[0, v_K]``.
    """
    members = validate_coalition(instance.n, coalition)
    v_K = require_positive("v_K", v_K)
    x, total = _validated_bids(instance, bids)
    return v_K * float(x[list(members)].sum()) / total
