"""
Classical value iteration over the deterministic grid MDP.

Every cell is a state. A move that would leave the grid or enter an obstacle
self-loops and earns ``r_obstacle``; every action taken at the goal earns
``r_goal``. Sweeps are synchronous::

    Q_n(s, a) = R(s, a) + λ · V_{n-1}(succ(s, a))
    V_n(s)    = max_a Q_n(s, a)
"""

from dataclasses import dataclass

import numpy as np

from core.exceptions import ConfigurationError, InvalidGoalError
from gridworld.types import ACTION_DELTAS, CellPos, OccupancyGrid


@dataclass(frozen=True, eq=False)
class ValueMap:
    """Final state values ``[Y, X]``, action values ``[A, Y, X]`` and per-sweep residuals."""

    values: np.ndarray
    q_values: np.ndarray
    residuals: tuple[float, ...] = ()

    def greedy_actions(self) -> np.ndarray:
        """Argmax action per cell, lowest index on ties."""
        return np.argmax(self.q_values, axis=0)

    def maximal_actions(self, pos: CellPos, tolerance: float = 0.0) -> frozenset[int]:
        q = self.q_values[:, pos.y, pos.x]
        return frozenset(int(a) for a in np.nonzero(q >= q.max() - tolerance)[0])


def successor_tables(
    grid: OccupancyGrid, corner_cutting: bool = True
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Successor rows/cols ``[A, Y, X]`` and a mask of blocked (self-looping) moves."""
    height, width = grid.shape
    ys, xs = np.mgrid[0:height, 0:width]
    free = grid.cells == 0
    n_actions = len(ACTION_DELTAS)
    succ_y = np.empty((n_actions, height, width), dtype=np.int64)
    succ_x = np.empty_like(succ_y)
    blocked = np.empty((n_actions, height, width), dtype=bool)

    for a, (dx, dy) in enumerate(ACTION_DELTAS):
        ty, tx = ys + dy, xs + dx
        inside = (ty >= 0) & (ty < height) & (tx >= 0) & (tx < width)
        cy, cx = np.clip(ty, 0, height - 1), np.clip(tx, 0, width - 1)
        ok = inside & free[cy, cx]
        if not corner_cutting and dx != 0 and dy != 0:
            side_x = free[ys, np.clip(xs + dx, 0, width - 1)]
            side_y = free[np.clip(ys + dy, 0, height - 1), xs]
            ok &= side_x & side_y
        succ_y[a] = np.where(ok, ty, ys)
        succ_x[a] = np.where(ok, tx, xs)
        blocked[a] = ~ok
    return succ_y, succ_x, blocked


def reference_value_iteration(
    grid: OccupancyGrid,
    goal: CellPos,
    r_goal: float = 1.0,
    r_obstacle: float = -1.0,
    discount: float = 0.99,
    n_sweeps: int | None = None,
    corner_cutting: bool = True,
) -> ValueMap:
    """Run ``n_sweeps`` synchronous sweeps (default ``X + Y``) from ``V_0 = 0``."""
    if not grid.is_free(goal):
        raise InvalidGoalError(tuple(goal))
    if not 0.0 < discount < 1.0:
        raise ConfigurationError(f"Discount must be in (0, 1), got {discount}")
    sweeps = grid.width + grid.height if n_sweeps is None else n_sweeps
    if sweeps < 1:
        raise ConfigurationError(f"Need at least one sweep, got {sweeps}")

    succ_y, succ_x, blocked = successor_tables(grid, corner_cutting)
    rewards = np.where(blocked, r_obstacle, 0.0)
    rewards[:, goal.y, goal.x] = r_goal

    values = np.zeros(grid.shape, dtype=np.float64)
    q_values = rewards.copy()
    residuals = []
    for _ in range(sweeps):
        q_values = rewards + discount * values[succ_y, succ_x]
        updated = q_values.max(axis=0)
        residuals.append(float(np.abs(updated - values).max()))
        values = updated
    return ValueMap(values=values, q_values=q_values, residuals=tuple(residuals))
