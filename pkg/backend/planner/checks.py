"""Equivalence of the hand-set VIN and classical value iteration."""

import numpy as np

from autodiff.tensor import precision
from expert.bfs import bfs_field
from expert.checks import CheckResult
from expert.value_iteration import reference_value_iteration
from gridworld.generators import generate_map
from gridworld.types import MapFamily

from .network import ValueIterationNetwork

R_GOAL = 1.0
R_OBSTACLE = -1.0
DISCOUNT = 0.99


def check_vin_matches_value_iteration(grids: int, seed: int, size: int = 8) -> CheckResult:
    """
    On random Complex maps with the true map as belief, the hand-set VIN's greedy
    action equals reference value iteration's greedy action at every reachable cell.

    ``K`` iterations of the network correspond to ``K + 1`` reference sweeps.
    """
    result = CheckResult("vin-equals-value-iteration")
    rng = np.random.default_rng([seed, 3])
    k = size * size
    with precision("float64"):
        network = ValueIterationNetwork.handset(k, R_GOAL, R_OBSTACLE, DISCOUNT)
    for _ in range(grids):
        grid = generate_map(MapFamily.COMPLEX, size, size, rng=rng)
        free = grid.free_cells()
        goal = free[int(rng.integers(len(free)))]
        field = bfs_field(grid, goal)
        reference = reference_value_iteration(grid, goal, R_GOAL, R_OBSTACLE, DISCOUNT, n_sweeps=k + 1)
        expected = reference.greedy_actions()
        with precision("float64"):
            q = network.q_values(grid.cells.astype(np.float64), goal)
        for pos in free:
            if pos == goal or not field.is_reachable(pos):
                continue
            _, action = network.select_action(q, pos)
            result.record(
                int(action) == int(expected[pos.y, pos.x]),
                f"{pos}->{goal}: vin {action.name}, reference {int(expected[pos.y, pos.x])}",
            )
    return result
