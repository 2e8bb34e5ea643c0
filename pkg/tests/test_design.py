import logging
import math

import numpy as np
import pytest

from src.contest.tullock.core import ContestInstance, Player, coordinator_utility, equilibrium
from src.contest.tullock.design import (
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
from src.contest.tullock.enums import Regime
from src.contest.tullock.exceptions import (
    ClosedFormDomainError,
    InfeasibleDesignError,
    InvalidCoalitionError,
    InvalidInstanceError,
    NoFeasibleCompanionError,
)

from .design_oracle import brute_force_design
from .instances import three_player_coordinator

COSTLY_RIVAL_OPTIMUM = (31 - 2 * math.sqrt(30)) / 22
COSTLY_RIVAL_V2, COSTLY_RIVAL_V3 = 1.439071, 0.788214


def random_three_player(rng, regime=None):
    """Random one-opponent, two-subordinate instance on which the closed form applies."""
    while True:
        v_1 = rng.uniform(0.5, 2.0)
        c_2, c_3 = rng.uniform(0.5, 10.0, 2)
        c_1 = rng.uniform(0.5, 20.0)
        coord = three_player_coordinator(v_1, c_1, c_2, c_3)
        excluded = excludes_opponent(coord)
        if regime is Regime.OPPONENT_EXCLUDED and not excluded:
            continue
        if regime is Regime.INTERIOR and excluded:
            continue
        if excluded or interior_closed_form_applies(coord):
            return coord


def random_coordinator(rng):
    """Random instance with 1-2 opponents and 2-3 subordinates."""
    opponents = tuple(Player(rng.uniform(0.5, 2.0), rng.uniform(0.5, 10.0)) for _ in range(rng.integers(1, 3)))
    costs = tuple(rng.uniform(0.5, 10.0, int(rng.integers(2, 4))).tolist())
    return CoordinatorInstance(opponents, costs, 1.0)


def assert_valid_design(coord: CoordinatorInstance, result: DesignResult) -> None:
    instance = coord.contest(result.valuations)
    eq = equilibrium(instance)
    active = eq.active[len(coord.opponents) :]

    assert abs(result.feasibility_residual) <= 1e-8
    assert 0.0 <= result.coordinator_utility <= coord.v_K
    assert result.coordinator_utility == pytest.approx(
        coordinator_utility(instance, coord.coalition, coord.v_K, eq.bids), abs=1e-9
    )
    ratios = np.asarray(result.valuations) / coord.sqrt_costs
    assert ratios[active] == pytest.approx(result.beta, rel=1e-8)


class TestCoordinatorInstance:
    def test_from_contest(self, costly_rival_contest):
        """Test that the coalition's costs are kept and its valuations dropped."""
        coord = CoordinatorInstance.from_contest(costly_rival_contest, [1, 2], 1.0)

        assert coord.opponents == (Player(1.0, 9.0),)
        assert coord.subordinate_costs == (10.0, 3.0)
        assert coord.coalition == (1, 2)
        assert coord.n == 3
        assert coord.k == 2

    def test_contest_orders_opponents_first(self):
        """Test that the induced contest lists opponents before subordinates."""
        contest = ContestInstance.from_arrays([1, 2, 3], [4, 5, 6])
        coord = CoordinatorInstance.from_contest(contest, [0], 2.0)

        induced = coord.contest([7.0])

        assert induced.valuations.tolist() == [2.0, 3.0, 7.0]
        assert induced.costs.tolist() == [5.0, 6.0, 4.0]

    @pytest.mark.parametrize("coalition", [[], [0, 1, 2]])
    def test_invalid_coalition(self, costly_rival_contest, coalition):
        """Test that the coalition must be a nonempty strict subset."""
        with pytest.raises(InvalidCoalitionError):
            CoordinatorInstance.from_contest(costly_rival_contest, coalition, 1.0)

    @pytest.mark.parametrize("opponents, costs, v_K", [
        ((), (1.0,), 1.0),
        ((Player(1.0, 1.0),), (), 1.0),
        ((Player(1.0, 1.0),), (0.0,), 1.0),
        ((Player(1.0, 1.0),), (1.0,), -1.0),
    ])
    def test_invalid_instance(self, opponents, costs, v_K):
        """Test that opponents, subordinates and a positive v_K are all required."""
        with pytest.raises(InvalidInstanceError):
            CoordinatorInstance(opponents, costs, v_K)

    @pytest.mark.parametrize("valuations", [[1.0], [1.0, 0.0], [1.0, -2.0]])
    def test_invalid_valuations(self, costly_rival_coordinator, valuations):
        """Test that valuations must be positive and one per subordinate."""
        with pytest.raises(InvalidInstanceError):
            costly_rival_coordinator.contest(valuations)


class TestFeasibilityResidual:
    def test_identity_point(self, costly_rival_coordinator):
        """Test that reporting v_K to everybody is exactly valid."""
        assert feasibility_residual(costly_rival_coordinator, [1.0, 1.0]) == 0.0

    def test_closed_form_optimum(self, costly_rival_coordinator):
        """Test that the published optimum is valid up to its rounding."""
        assert abs(feasibility_residual(costly_rival_coordinator, [COSTLY_RIVAL_V2, COSTLY_RIVAL_V3])) <= 1e-6

    def test_over_reporting(self, costly_rival_coordinator):
        """Test that reporting more than v_K to everybody over-promises."""
        assert feasibility_residual(costly_rival_coordinator, [2.0, 2.0]) > 0.0


class TestCompanion:
    def test_identity(self, costly_rival_coordinator):
        """Test that v2 = v_K pairs with v3 = v_K."""
        assert solve_feasible_companion(costly_rival_coordinator, 1.0) == 1.0

    def test_costly_rival_optimum(self, costly_rival_coordinator):
        """Test that the optimum lies on the feasible segment."""
        assert solve_feasible_companion(costly_rival_coordinator, COSTLY_RIVAL_V2) == pytest.approx(COSTLY_RIVAL_V3, abs=1e-5)

    def test_under_reporting(self, costly_rival_coordinator):
        """Test that under-reporting one subordinate forces over-reporting the other."""
        v3 = solve_feasible_companion(costly_rival_coordinator, 0.5)

        assert v3 > 1.0
        assert abs(feasibility_residual(costly_rival_coordinator, [0.5, v3])) < 1e-9

    def test_no_companion(self, costly_rival_coordinator):
        """Test that an extreme report cannot be balanced."""
        with pytest.raises(NoFeasibleCompanionError, match="no-feasible-companion"):
            solve_feasible_companion(costly_rival_coordinator, 100.0)

    def test_any_position(self):
        """Test solving for the middle of three subordinates."""
        coord = CoordinatorInstance((Player(1.0, 5.0),), (1.0, 2.0, 4.0), 1.0)

        v = solve_companion(coord, [1.2, 0.0, 0.9], 1)

        assert abs(feasibility_residual(coord, [1.2, v, 0.9])) < 1e-9

    def test_requires_two_subordinates(self):
        """Test that the two-subordinate helpers reject other coalition sizes."""
        coord = CoordinatorInstance((Player(1.0, 5.0),), (1.0, 2.0, 4.0), 1.0)

        with pytest.raises(InvalidInstanceError, match="exactly 2 subordinates"):
            solve_feasible_companion(coord, 1.0)

    @pytest.mark.parametrize("position", [-1, 2, 0.5])
    def test_bad_position(self, costly_rival_coordinator, position):
        """Test that the free subordinate must exist."""
        with pytest.raises(InvalidInstanceError):
            solve_companion(costly_rival_coordinator, [1.0, 1.0], position)


class TestSweep:
    def test_baseline_row(self, costly_rival_coordinator):
        """Test the baseline design 9/11 at v2 = v_K."""
        (row,) = sweep(costly_rival_coordinator, [1.0])

        assert (row.v2, row.v3) == (1.0, 1.0)
        assert row.coordinator_utility == pytest.approx(9 / 11, abs=1e-9)
        assert row.alpha == pytest.approx(1 / 11)

    def test_optimum_row(self, costly_rival_coordinator):
        """Test that the closed-form optimum beats its neighbours on the grid."""
        rows = sweep(costly_rival_coordinator, [1.3, COSTLY_RIVAL_V2, 1.6])

        assert rows[1].coordinator_utility == pytest.approx(COSTLY_RIVAL_OPTIMUM, abs=1e-7)
        assert rows[1].coordinator_utility == max(row.coordinator_utility for row in rows)

    def test_symmetric_single_point(self):
        """Test that v_K is its own companion when the subordinates are alike."""
        coord = three_player_coordinator(1.0, 1.0, 2.0, 2.0)

        (row,) = sweep(coord, [1.0])

        assert row.v3 == 1.0
        assert row.coordinator_utility == pytest.approx(0.4)

    def test_missing_companion_marked(self, costly_rival_coordinator, caplog):
        """Test that infeasible grid points become rows of missing values, logged at INFO."""
        caplog.set_level(logging.DEBUG)

        rows = sweep(costly_rival_coordinator, [1.0, 100.0])

        assert rows[0].feasible
        assert rows[1] == SweepRow(100.0, None, None, None)
        assert not rows[1].feasible
        missing = [r for r in caplog.records if "No feasible companion" in r.getMessage()]
        assert [r.levelno for r in missing] == [logging.INFO]
        assert not [r for r in caplog.records if r.levelno >= logging.WARNING]

    def test_empty_grid(self, costly_rival_coordinator):
        """Test that an empty grid is rejected."""
        with pytest.raises(InvalidInstanceError):
            sweep(costly_rival_coordinator, [])

    def test_utility_bounded(self, costly_rival_coordinator):
        """Test that every feasible row stays within [0, v_K]."""
        for row in sweep(costly_rival_coordinator, np.linspace(0.5, 2.5, 41)):
            if row.feasible:
                assert 0.0 <= row.coordinator_utility <= 1.0


class TestThreePlayerDesign:
    def test_costly_rival_interior(self, costly_rival_coordinator):
        """Test the interior optimum (31 - 2 sqrt(30)) / 22."""
        result = design_three_player(costly_rival_coordinator)

        assert result.regime is Regime.INTERIOR
        assert result.coordinator_utility == pytest.approx(COSTLY_RIVAL_OPTIMUM, abs=1e-9)
        assert result.valuations == pytest.approx((COSTLY_RIVAL_V2, COSTLY_RIVAL_V3), abs=1e-5)
        assert result.beta == pytest.approx(0.4550741, abs=1e-6)
        assert_valid_design(costly_rival_coordinator, result)

    def test_equal_costs(self):
        """Test that equal subordinate costs make v_K the optimal report."""
        coord = three_player_coordinator(1.3, 1.7, 2.5, 2.5)

        result = design_three_player(coord)

        assert result.regime is Regime.INTERIOR
        assert result.valuations == pytest.approx((1.0, 1.0))

    def test_opponent_excluded(self):
        """Test the witness report that shuts a weak opponent out."""
        coord = three_player_coordinator(1.0, 10.0, 1.0, 1.0)

        result = design_three_player(coord)

        assert result.regime is Regime.OPPONENT_EXCLUDED
        assert result.coordinator_utility == pytest.approx(1.0, abs=1e-12)
        assert result.valuations == pytest.approx((1.0, 1.0))
        v_2, v_3 = result.valuations
        assert 1.0 * v_3**2 + 1.0 * v_2**2 == pytest.approx(1.0 * v_3 + 1.0 * v_2)
        assert 10.0 >= 1.0 / v_2 + 1.0 / v_3

    def test_closed_form_outside_its_domain(self, caplog):
        """Test that very unequal subordinate costs push the closed form out of bounds without logging an error."""
        coord = three_player_coordinator(1.0, 1.0, 100.0, 1.0)
        caplog.set_level(logging.DEBUG)

        assert not interior_closed_form_applies(coord)
        with pytest.raises(ClosedFormDomainError):
            design_three_player(coord)
        assert not [r for r in caplog.records if r.levelno >= logging.WARNING]

    def test_wrong_shape(self):
        """Test that the closed form needs one opponent and two subordinates."""
        coord = CoordinatorInstance((Player(1.0, 5.0),), (1.0, 2.0, 4.0), 1.0)

        with pytest.raises(InvalidInstanceError, match="1 opponent and 2 subordinates"):
            design_three_player(coord)

    def test_regime_boundary_continuity(self):
        """Test that both regimes give v_K exactly at the boundary."""
        rng = np.random.default_rng(7)
        for _ in range(20):
            c_2, c_3 = rng.uniform(0.5, 10.0, 2)
            v_1 = rng.uniform(0.5, 2.0)
            coord = three_player_coordinator(v_1, v_1 * 2.0 * math.sqrt(c_2 * c_3), c_2, c_3)

            _, interior = interior_optimum(coord)

            assert interior == pytest.approx(1.0, abs=1e-10)
            assert design_three_player(coord).coordinator_utility == pytest.approx(1.0, abs=1e-10)

    def test_opponent_exclusion(self):
        """Test that excluded-regime designs leave the opponent with exactly zero bid."""
        rng = np.random.default_rng(8)
        for _ in range(20):
            c_2, c_3 = rng.uniform(0.5, 5.0, 2)
            v_1 = rng.uniform(0.5, 2.0)
            c_1 = v_1 * 2.0 * math.sqrt(c_2 * c_3) * rng.uniform(1.05, 3.0)
            coord = three_player_coordinator(v_1, c_1, c_2, c_3)

            result = design_three_player(coord)
            eq = equilibrium(coord.contest(result.valuations))

            assert result.regime is Regime.OPPONENT_EXCLUDED
            assert eq.bids[0] == 0.0
            assert result.coordinator_utility == pytest.approx(1.0, abs=1e-12)
            assert_valid_design(coord, result)

    def test_random_instances_are_valid(self):
        """Test validity, bounds and square-root proportionality on random instances."""
        rng = np.random.default_rng(9)
        for _ in range(50):
            coord = random_three_player(rng)

            result = design_three_player(coord)

            assert_valid_design(coord, result)
            assert result.coordinator_utility >= baseline_utility(coord) - 1e-9

    def test_beats_sweep(self, costly_rival_coordinator):
        """Test that no point of the feasible segment beats the closed form."""
        best = design_three_player(costly_rival_coordinator).coordinator_utility

        rows = sweep(costly_rival_coordinator, np.linspace(0.5, 2.5, 201))

        assert max(row.coordinator_utility for row in rows if row.feasible) <= best + 1e-9

    @pytest.mark.slow
    def test_beats_sweep_bulk(self):
        """Test sweep dominance on a thousand random instances."""
        rng = np.random.default_rng(10)
        for _ in range(1000):
            coord = random_three_player(rng)
            best = design_three_player(coord).coordinator_utility

            rows = sweep(coord, np.linspace(0.05, 5.0, 200))

            feasible = [row.coordinator_utility for row in rows if row.feasible]
            assert max(feasible, default=-np.inf) <= best + 1e-6

    @pytest.mark.slow
    def test_beats_fine_sweep(self):
        """Test sweep dominance over 2,000-point grids on random instances."""
        rng = np.random.default_rng(15)
        for _ in range(50):
            coord = random_three_player(rng)
            best = design_three_player(coord).coordinator_utility

            rows = sweep(coord, np.linspace(0.05, 5.0, 2000))

            feasible = [row.coordinator_utility for row in rows if row.feasible]
            assert max(feasible) <= best + 1e-6


class TestGeneralDesign:
    def test_costly_rival_matches_closed_form(self, costly_rival_coordinator):
        """Test that the general solver reproduces the interior closed form."""
        result = design_general(costly_rival_coordinator)

        assert result.coordinator_utility == pytest.approx(COSTLY_RIVAL_OPTIMUM, abs=1e-6)
        assert result.beta == pytest.approx(0.4550741, abs=1e-6)
        assert result.regime is Regime.INTERIOR
        assert_valid_design(costly_rival_coordinator, result)

    def test_symmetric_three_players(self):
        """Test beta = 1 and a two-thirds share when all players are alike."""
        result = design_general(three_player_coordinator(1.0, 1.0, 1.0, 1.0))

        assert result.beta == pytest.approx(1.0, abs=1e-9)
        assert result.valuations == pytest.approx((1.0, 1.0), abs=1e-9)
        assert result.coordinator_utility == pytest.approx(2 / 3, abs=1e-9)

    def test_opponent_excluded(self):
        """Test that the general solver finds the exclusion witness."""
        coord = three_player_coordinator(1.0, 10.0, 1.0, 1.0)

        result = design_general(coord)

        assert result.regime is Regime.OPPONENT_EXCLUDED
        assert result.coordinator_utility == pytest.approx(1.0, abs=1e-9)

    def test_outside_closed_form_domain(self):
        """Test that the general solver handles instances the closed form cannot."""
        coord = three_player_coordinator(1.0, 1.0, 100.0, 1.0)

        result = design_general(coord)

        assert_valid_design(coord, result)
        assert result.coordinator_utility >= baseline_utility(coord) - 1e-9

    def test_cross_solver_agreement(self):
        """Test agreement with the closed form in both regimes."""
        rng = np.random.default_rng(11)
        regimes = [Regime.INTERIOR, Regime.OPPONENT_EXCLUDED] * 10
        for regime in regimes:
            coord = random_three_player(rng, regime)

            general, closed = design_general(coord), design_three_player(coord)

            assert general.coordinator_utility == pytest.approx(closed.coordinator_utility, abs=1e-6)
            assert general.regime is closed.regime

    @pytest.mark.slow
    def test_cross_solver_agreement_bulk(self):
        """Test agreement on two hundred random instances spanning both regimes."""
        rng = np.random.default_rng(12)
        for i in range(200):
            coord = random_three_player(rng, Regime.INTERIOR if i % 2 else Regime.OPPONENT_EXCLUDED)

            general, closed = design_general(coord), design_three_player(coord)

            assert general.coordinator_utility == pytest.approx(closed.coordinator_utility, abs=1e-6)

    def test_beats_baseline(self):
        """Test that the optimum never falls below the truthful report."""
        rng = np.random.default_rng(13)
        for _ in range(30):
            coord = random_coordinator(rng)

            result = design_general(coord)

            assert_valid_design(coord, result)
            assert result.coordinator_utility >= baseline_utility(coord) - 1e-9

    def test_four_players_against_brute_force(self):
        """Test three subordinates against an unstructured multi-start search."""
        coord = CoordinatorInstance((Player(1.0, 5.0),), (1.0, 2.0, 4.0), 1.0)

        result = design_general(coord)
        brute, _ = brute_force_design(coord, starts=10, seed=1)

        assert_valid_design(coord, result)
        assert brute <= result.coordinator_utility + 1e-4
        assert result.coordinator_utility - brute <= 1e-4

    @pytest.mark.slow
    def test_square_root_structure_is_optimal(self):
        """Test that the brute-force search never beats the structured optimum."""
        rng = np.random.default_rng(14)
        for _ in range(50):
            coord = random_coordinator(rng)

            result = design_general(coord)
            brute, _ = brute_force_design(coord, starts=100)

            assert brute <= result.coordinator_utility + 1e-4
            assert_valid_design(coord, result)

    def test_no_feasible_beta(self, mocker):
        """Test that a constraint without usable roots is reported."""
        mocker.patch(
            "src.contest.tullock.design._reduced_constraint",
            side_effect=lambda coord, betas: (np.ones(betas.size), np.ones(betas.size, dtype=bool)),
        )

        with pytest.raises(InfeasibleDesignError, match="no-feasible-beta"):
            design_general(three_player_coordinator(1.0, 9.0, 10.0, 3.0))


class TestBaseline:
    def test_costly_rival(self, costly_rival_coordinator):
        """Test the truthful report's 9/11."""
        assert baseline_utility(costly_rival_coordinator) == pytest.approx(9 / 11, abs=1e-9)
