from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pytest

from gridworld.types import Action, CellPos, OccupancyGrid
from planner.policies import Decision


@pytest.fixture(autouse=True)
def data_root(settings, tmp_path: Path) -> Path:
    """Keep command outputs out of the working tree."""
    settings.MEMNAV_DATA_ROOT = tmp_path / "var"
    settings.MEMNAV_WORKERS = 1
    return settings.MEMNAV_DATA_ROOT


@pytest.fixture
def open_grid() -> OccupancyGrid:
    return OccupancyGrid.empty(6, 6)


@pytest.fixture
def wall_grid() -> OccupancyGrid:
    """A vertical wall with a single gap at the bottom."""
    return OccupancyGrid.from_rows(
        [
            "..#...",
            "..#...",
            "..#...",
            "..#...",
            "......",
            "......",
        ]
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


class ScriptedPlanner:
    """Plays back a fixed action sequence, cycling when it runs out."""

    def __init__(self, actions: Sequence[Action]) -> None:
        self.actions = list(actions)
        self.calls = 0

    def decide(self, belief: np.ndarray, pos: CellPos, goal: CellPos) -> Decision:
        action = self.actions[self.calls % len(self.actions)]
        self.calls += 1
        return Decision(action)


@pytest.fixture
def scripted_planner():
    return ScriptedPlanner
