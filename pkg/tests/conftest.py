from pathlib import Path

import pytest

from src.contest.tullock.core import ContestInstance
from src.contest.tullock.design import CoordinatorInstance

DEMO_DIR = Path(__file__).resolve().parent.parent / "demo"


@pytest.fixture
def costly_rival_contest():
    """Baseline contest: every player values the prize at 1, costs (9, 10, 3)."""
    return ContestInstance.from_arrays([1, 1, 1], [9, 10, 3])


@pytest.fixture
def costly_rival_coordinator(costly_rival_contest):
    """Player 1 against a coalition of players 2 and 3 with v_K = 1."""
    return CoordinatorInstance.from_contest(costly_rival_contest, [1, 2], 1.0)


@pytest.fixture
def demo_dir():
    return DEMO_DIR
