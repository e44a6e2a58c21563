"""
Independent oracles for the BFS expert and reference value iteration.

Used by the ``oracle_check`` command and the test-suite; none of these share
code paths with ``expert.bfs`` beyond the world dynamics.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from gridworld.generators import generate_map
from gridworld.types import Action, CellPos, MapFamily, OccupancyGrid
from gridworld.world import apply_action

from .bfs import bfs_field, optimal_actions
from .value_iteration import reference_value_iteration

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    cases: int = 0
    mismatches: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.cases > 0 and self.mismatches == 0

    def record(self, ok: bool, note: str) -> None:
        self.cases += 1
        if not ok:
            self.mismatches += 1
            if len(self.notes) < 10:
                self.notes.append(note)


def random_grid(width: int, height: int, obstacle_prob: float, rng: np.random.Generator) -> OccupancyGrid:
    """Bernoulli obstacles; used below the generators' minimum size."""
    return OccupancyGrid((rng.random((height, width)) < obstacle_prob).astype(np.uint8))


def all_pairs_distances(grid: OccupancyGrid) -> np.ndarray:
    """Floyd–Warshall over free cells; ``inf`` marks unreachable pairs. Indexed by flat cell id."""
    height, width = grid.shape
    n = width * height
    dist = np.full((n, n), np.inf)
    for pos in grid.free_cells():
        i = pos.y * width + pos.x
        dist[i, i] = 0.0
        for action in Action:
            nxt = apply_action(grid, pos, action)
            if isinstance(nxt, CellPos):
                dist[i, nxt.y * width + nxt.x] = 1.0
    for k in range(n):
        dist = np.minimum(dist, dist[:, k, None] + dist[None, k, :])
    return dist


def enumerate_shortest_length(grid: OccupancyGrid, start: CellPos, goal: CellPos) -> int | None:
    """Exhaustive depth-first enumeration of simple paths with branch-and-bound pruning."""
    best: list[int | None] = [None]
    visited = {start}

    def explore(pos: CellPos, length: int) -> None:
        if best[0] is not None and length + pos.chebyshev(goal) >= best[0]:
            return
        if pos == goal:
            best[0] = length
            return
        successors = [nxt for nxt in (apply_action(grid, pos, a) for a in Action) if isinstance(nxt, CellPos)]
        for nxt in sorted(successors, key=lambda p: p.chebyshev(goal)):
            if nxt not in visited:
                visited.add(nxt)
                explore(nxt, length + 1)
                visited.remove(nxt)

    if not grid.connected(start, goal):
        return None
    explore(start, 0)
    return best[0]


def check_bfs_against_enumeration(grids: int, seed: int, size: int = 5) -> CheckResult:
    """BFS distances equal exhaustive path enumeration on every free-cell pair."""
    result = CheckResult("bfs-vs-enumeration")
    rng = np.random.default_rng([seed, 4])
    for _ in range(grids):
        grid = random_grid(size, size, 0.3, rng)
        for goal in grid.free_cells():
            field_ = bfs_field(grid, goal)
            for start in grid.free_cells():
                expected = enumerate_shortest_length(grid, start, goal)
                got = field_.at(start) if field_.is_reachable(start) else None
                result.record(got == expected, f"{start}->{goal}: bfs {got}, enumeration {expected}")
    return result


def check_bfs_against_floyd_warshall(grids: int, seed: int, size: int = 5) -> CheckResult:
    result = CheckResult("bfs-vs-floyd-warshall")
    rng = np.random.default_rng([seed, 0])
    for _ in range(grids):
        grid = random_grid(size, size, 0.3, rng)
        free = grid.free_cells()
        if not free:
            continue
        dist = all_pairs_distances(grid)
        for goal in free:
            field_ = bfs_field(grid, goal)
            for start in free:
                expected = dist[start.y * size + start.x, goal.y * size + goal.x]
                got = field_.at(start) if field_.is_reachable(start) else np.inf
                result.record(got == expected, f"{start}->{goal}: bfs {got}, fw {expected}")
    return result


def check_optimal_action_definition(grids: int, seed: int, size: int = 6) -> CheckResult:
    """Each optimal action's successor lies on a shortest path, and every such action is listed."""
    result = CheckResult("optimal-actions")
    rng = np.random.default_rng([seed, 1])
    for _ in range(grids):
        grid = random_grid(size, size, 0.25, rng)
        dist = all_pairs_distances(grid)
        for goal in grid.free_cells():
            field_ = bfs_field(grid, goal)
            g = goal.y * size + goal.x
            for pos in grid.free_cells():
                if pos == goal or not field_.is_reachable(pos):
                    continue
                here = dist[pos.y * size + pos.x, g]
                expected = set()
                for action in Action:
                    nxt = apply_action(grid, pos, action)
                    if isinstance(nxt, CellPos) and dist[nxt.y * size + nxt.x, g] == here - 1:
                        expected.add(action)
                got = optimal_actions(field_, pos)
                result.record(set(got) == expected, f"{pos}->{goal}: {sorted(got)} != {sorted(expected)}")
    return result


def check_value_iteration_policy(grids: int, seed: int, size: int = 8) -> CheckResult:
    """Greedy reference value iteration picks only BFS-optimal actions at reachable cells."""
    result = CheckResult("value-iteration-policy")
    rng = np.random.default_rng([seed, 2])
    for _ in range(grids):
        grid = generate_map(MapFamily.COMPLEX, size, size, rng=rng)
        free = grid.free_cells()
        goal = free[int(rng.integers(len(free)))]
        field_ = bfs_field(grid, goal)
        value_map = reference_value_iteration(grid, goal, n_sweeps=size * size)
        greedy = value_map.greedy_actions()
        for pos in grid.free_cells():
            if pos == goal or not field_.is_reachable(pos):
                continue
            action = Action(int(greedy[pos.y, pos.x]))
            result.record(action in optimal_actions(field_, pos), f"{pos}->{goal}: greedy {action.name}")
    return result
