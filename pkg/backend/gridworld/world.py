"""
World dynamics: moving a robot, sensing a receptive window, and the
communication graph between robots.

These are the only functions besides the episode judge that read the true grid.
"""

from collections.abc import Sequence

import numpy as np

from core.exceptions import ConfigurationError

from .types import (
    ACTION_DELTAS,
    Action,
    CellPos,
    MoveFailure,
    MoveOutcome,
    Observation,
    OccupancyGrid,
    window_slices,
)

CommEdge = tuple[int, int]


def apply_action(
    grid: OccupancyGrid, pos: CellPos, action: Action, corner_cutting: bool = True
) -> MoveOutcome:
    """
    Move one cell in the given compass direction.

    With ``corner_cutting`` disabled, a diagonal move additionally needs both
    orthogonally adjacent cells to be free.
    """
    dx, dy = ACTION_DELTAS[action]
    target = CellPos(pos.x + dx, pos.y + dy)
    if not grid.in_bounds(target):
        return MoveFailure.OFF_GRID
    if not grid.is_free(target):
        return MoveFailure.INTO_OBSTACLE
    if not corner_cutting and dx != 0 and dy != 0:
        if not (grid.is_free(CellPos(pos.x + dx, pos.y)) and grid.is_free(CellPos(pos.x, pos.y + dy))):
            return MoveFailure.INTO_OBSTACLE
    return target


def observe(
    grid: OccupancyGrid,
    pos: CellPos,
    half_width: int,
    noise: float = 0.0,
    rng: np.random.Generator | None = None,
) -> Observation:
    """
    Sense the (2Z+1)×(2Z+1) window around ``pos``, clipped at the borders.

    Each in-window cell is flipped independently with probability ``noise``;
    everything outside the window is reported as free.
    """
    if half_width < 0:
        raise ConfigurationError(f"Receptive half-width must be >= 0, got {half_width}")
    if not 0.0 <= noise <= 1.0:
        raise ConfigurationError(f"Flip probability must be in [0, 1], got {noise}")

    rows, cols = window_slices(grid.width, grid.height, pos, half_width)
    sensed = np.zeros(grid.shape, dtype=np.uint8)
    window = grid.cells[rows, cols].copy()
    if noise > 0.0:
        if rng is None:
            raise ConfigurationError("A random generator is required when noise > 0")
        flips = rng.random(window.shape) < noise
        window ^= flips.astype(np.uint8)
    sensed[rows, cols] = window
    return Observation(grid=sensed, center=pos, half_width=half_width)


def comm_graph(positions: Sequence[CellPos], comm_range: int) -> frozenset[CommEdge]:
    """Undirected edges ``(i, j)``, ``i < j``, between robots within Manhattan distance ``c``."""
    edges: set[CommEdge] = set()
    for i, a in enumerate(positions):
        for j in range(i + 1, len(positions)):
            if a.manhattan(positions[j]) <= comm_range:
                edges.add((i, j))
    return frozenset(edges)


def neighbors_of(edges: frozenset[CommEdge], robot: int) -> list[int]:
    """Sorted neighbor ids of ``robot``."""
    found = [j for i, j in edges if i == robot] + [i for i, j in edges if j == robot]
    return sorted(found)
