"""
Breadth-first-search expert.

Because every move costs one step, BFS from the goal gives exact shortest
path lengths; an action is optimal at ``s`` exactly when its successor is one
step closer to the goal.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from core.exceptions import DomainError, InvalidGoalError
from gridworld.types import Action, CellPos, OccupancyGrid, free_neighbors
from gridworld.world import apply_action

UNREACHABLE = -1


@dataclass(frozen=True, eq=False)
class DistanceField:
    """Shortest-path distance to ``goal`` per cell; ``UNREACHABLE`` where no path exists."""

    grid: OccupancyGrid
    goal: CellPos
    distances: np.ndarray
    corner_cutting: bool = True

    def at(self, pos: CellPos) -> int:
        return int(self.distances[pos.y, pos.x])

    def is_reachable(self, pos: CellPos) -> bool:
        return self.grid.in_bounds(pos) and self.distances[pos.y, pos.x] != UNREACHABLE


def bfs_field(grid: OccupancyGrid, goal: CellPos, corner_cutting: bool = True) -> DistanceField:
    if not grid.is_free(goal):
        raise InvalidGoalError(tuple(goal))
    distances = np.full(grid.shape, UNREACHABLE, dtype=np.int32)
    distances[goal.y, goal.x] = 0
    queue = deque([goal])
    while queue:
        pos = queue.popleft()
        step = distances[pos.y, pos.x] + 1
        # legality of a move is symmetric, so predecessors are the free neighbors
        for prev in free_neighbors(grid, pos, corner_cutting):
            if distances[prev.y, prev.x] == UNREACHABLE:
                distances[prev.y, prev.x] = step
                queue.append(prev)
    distances.setflags(write=False)
    return DistanceField(grid, goal, distances, corner_cutting)


def optimal_actions(field: DistanceField, pos: CellPos) -> frozenset[Action]:
    """All actions whose legal successor decreases the distance to the goal by one."""
    if not field.is_reachable(pos):
        raise DomainError(f"Cell {pos} cannot reach goal {field.goal}", pos=tuple(pos))
    here = field.at(pos)
    if here == 0:
        raise DomainError("No optimal action at the goal itself", pos=tuple(pos))
    best = set()
    for action in Action:
        nxt = apply_action(field.grid, pos, action, field.corner_cutting)
        if isinstance(nxt, CellPos) and field.at(nxt) == here - 1:
            best.add(action)
    return frozenset(best)


def action_mask(actions: frozenset[Action] | set[Action]) -> int:
    mask = 0
    for action in actions:
        mask |= 1 << int(action)
    return mask


def actions_from_mask(mask: int) -> frozenset[Action]:
    return frozenset(action for action in Action if mask & (1 << int(action)))


def canonical_action(field: DistanceField, pos: CellPos) -> Action:
    """Deterministic tie-break: the lowest-index optimal action."""
    return min(optimal_actions(field, pos))


def shortest_path_length(
    grid: OccupancyGrid, start: CellPos, goal: CellPos, corner_cutting: bool = True
) -> int | None:
    """Shortest path length, or ``None`` when the goal is unreachable."""
    field = bfs_field(grid, goal, corner_cutting)
    if not field.is_reachable(start):
        return None
    return field.at(start)


def expert_path(field: DistanceField, start: CellPos) -> list[CellPos]:
    """Cells visited by following canonical actions from ``start`` to the goal."""
    path = [start]
    pos = start
    while pos != field.goal:
        nxt = apply_action(field.grid, pos, canonical_action(field, pos), field.corner_cutting)
        if not isinstance(nxt, CellPos):
            raise DomainError(f"Canonical action at {pos} is illegal: {nxt.value}", pos=tuple(pos))
        pos = nxt
        path.append(pos)
    return path
