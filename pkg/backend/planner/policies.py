"""Planners a robot can use to turn its belief into an action."""

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from expert.bfs import bfs_field, canonical_action
from gridworld.types import Action, CellPos, OccupancyGrid
from gridworld.world import apply_action

from .network import ValueIterationNetwork

BELIEF_THRESHOLD = 0.5


@dataclass(frozen=True, eq=False)
class Decision:
    action: Action
    probabilities: np.ndarray | None = None


class Planner(Protocol):
    def decide(self, belief: np.ndarray, pos: CellPos, goal: CellPos) -> Decision: ...


class VINPlanner:
    def __init__(self, network: ValueIterationNetwork) -> None:
        self.network = network

    def decide(self, belief: np.ndarray, pos: CellPos, goal: CellPos) -> Decision:
        probabilities, action = self.network.plan(belief, pos, goal)
        return Decision(action, probabilities)


class BFSPlanner:
    """
    Shortest path on the thresholded belief; unknown cells count as free and the
    goal and the robot's own cell are always treated as free.
    """

    def __init__(self, threshold: float = BELIEF_THRESHOLD) -> None:
        self.threshold = threshold

    def decide(self, belief: np.ndarray, pos: CellPos, goal: CellPos) -> Decision:
        cells = (belief >= self.threshold).astype(np.uint8)
        cells[goal.y, goal.x] = 0
        cells[pos.y, pos.x] = 0
        grid = OccupancyGrid(cells)
        if pos == goal:
            return Decision(Action.N)
        field = bfs_field(grid, goal)
        if field.is_reachable(pos):
            return Decision(canonical_action(field, pos))
        return Decision(self._fallback(grid, pos, goal))

    @staticmethod
    def _fallback(grid: OccupancyGrid, pos: CellPos, goal: CellPos) -> Action:
        """Believed-legal move closest to the goal; ``N`` when boxed in."""
        best: tuple[int, Action] | None = None
        for action in Action:
            nxt = apply_action(grid, pos, action)
            if isinstance(nxt, CellPos):
                key = (nxt.chebyshev(goal), action)
                if best is None or key < best:
                    best = key
        return best[1] if best is not None else Action.N
