"""
Ground-truth world types: occupancy grids, cell positions, the eight compass
actions, observations and episode configurations.

Grids are stored row-major as ``cells[y, x]`` (``y`` = row, ``x`` = column);
``0`` is a free cell and ``1`` an obstacle.
"""

from collections import deque
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from enum import Enum, IntEnum
from functools import cached_property
from typing import NamedTuple

import numpy as np

from core.exceptions import ConfigurationError, ShapeError

MIN_GRID_SIZE = 4


class Action(IntEnum):
    """The eight compass moves; ``N`` decreases the row index."""

    N = 0
    NE = 1
    E = 2
    SE = 3
    S = 4
    SW = 5
    W = 6
    NW = 7

    @property
    def delta(self) -> tuple[int, int]:
        return ACTION_DELTAS[self]

    @property
    def is_diagonal(self) -> bool:
        dx, dy = ACTION_DELTAS[self]
        return dx != 0 and dy != 0


ACTION_DELTAS: tuple[tuple[int, int], ...] = (
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
)

NUM_ACTIONS = len(ACTION_DELTAS)


class CellPos(NamedTuple):
    x: int
    y: int

    def moved(self, action: Action) -> "CellPos":
        dx, dy = ACTION_DELTAS[action]
        return CellPos(self.x + dx, self.y + dy)

    def manhattan(self, other: "CellPos") -> int:
        return abs(self.x - other.x) + abs(self.y - other.y)

    def chebyshev(self, other: "CellPos") -> int:
        return max(abs(self.x - other.x), abs(self.y - other.y))


class MoveFailure(Enum):
    """Tagged outcomes of an illegal move."""

    OFF_GRID = "off_grid"
    INTO_OBSTACLE = "into_obstacle"


MoveOutcome = CellPos | MoveFailure


class MapFamily(str, Enum):
    SIMPLE = "simple"
    COMPLEX = "complex"

    @property
    def default_fill(self) -> float:
        return 0.20 if self is MapFamily.SIMPLE else 0.35


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """Immutable X×Y binary occupancy map."""

    cells: np.ndarray

    def __post_init__(self) -> None:
        cells = np.asarray(self.cells)
        if cells.ndim != 2:
            raise ShapeError("Occupancy grid must be 2-D", actual=tuple(cells.shape))
        height, width = cells.shape
        if width < MIN_GRID_SIZE or height < MIN_GRID_SIZE:
            raise ConfigurationError(
                f"Grid must be at least {MIN_GRID_SIZE}x{MIN_GRID_SIZE}, got {width}x{height}",
                width=width,
                height=height,
            )
        if not np.isin(cells, (0, 1)).all():
            raise ConfigurationError("Occupancy values must be 0 or 1")
        frozen = cells.astype(np.uint8, copy=True)
        frozen.setflags(write=False)
        object.__setattr__(self, "cells", frozen)

    @classmethod
    def empty(cls, width: int, height: int) -> "OccupancyGrid":
        return cls(np.zeros((height, width), dtype=np.uint8))

    @classmethod
    def from_rows(cls, rows: Sequence[str]) -> "OccupancyGrid":
        """Build a grid from text rows, ``#`` marking obstacles."""
        return cls(np.array([[1 if ch == "#" else 0 for ch in row] for row in rows]))

    @property
    def width(self) -> int:
        return int(self.cells.shape[1])

    @property
    def height(self) -> int:
        return int(self.cells.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def in_bounds(self, pos: CellPos) -> bool:
        return 0 <= pos.x < self.width and 0 <= pos.y < self.height

    def is_free(self, pos: CellPos) -> bool:
        return self.in_bounds(pos) and self.cells[pos.y, pos.x] == 0

    def free_cells(self) -> list[CellPos]:
        ys, xs = np.nonzero(self.cells == 0)
        return [CellPos(int(x), int(y)) for y, x in zip(ys, xs, strict=True)]

    def occupied_fraction(self) -> float:
        return float(self.cells.mean())

    def equals(self, other: "OccupancyGrid") -> bool:
        return np.array_equal(self.cells, other.cells)

    @cached_property
    def component_labels(self) -> np.ndarray:
        """8-connected component label per free cell; obstacles are -1."""
        labels = np.full(self.shape, -1, dtype=np.int32)
        current = 0
        for start in self.free_cells():
            if labels[start.y, start.x] >= 0:
                continue
            labels[start.y, start.x] = current
            queue = deque([start])
            while queue:
                pos = queue.popleft()
                for nxt in free_neighbors(self, pos):
                    if labels[nxt.y, nxt.x] < 0:
                        labels[nxt.y, nxt.x] = current
                        queue.append(nxt)
            current += 1
        labels.setflags(write=False)
        return labels

    def connected(self, a: CellPos, b: CellPos) -> bool:
        if not (self.is_free(a) and self.is_free(b)):
            return False
        return bool(self.component_labels[a.y, a.x] == self.component_labels[b.y, b.x])

    def largest_component_share(self) -> float:
        """Fraction of free cells in the largest connected free component."""
        labels = self.component_labels[self.component_labels >= 0]
        if labels.size == 0:
            return 0.0
        return float(np.bincount(labels).max() / labels.size)


def free_neighbors(
    grid: OccupancyGrid, pos: CellPos, corner_cutting: bool = True
) -> Iterator[CellPos]:
    """Free cells reachable from ``pos`` in one legal move."""
    for action in Action:
        nxt = pos.moved(action)
        if not grid.is_free(nxt):
            continue
        if not corner_cutting and action.is_diagonal:
            dx, dy = action.delta
            if not (grid.is_free(CellPos(pos.x + dx, pos.y)) and grid.is_free(CellPos(pos.x, pos.y + dy))):
                continue
        yield nxt


@dataclass(frozen=True, eq=False)
class Observation:
    """
    A robot's sensing at one time-step, represented at full X×Y size.

    Cells outside the (2Z+1)×(2Z+1) receptive window are exactly 0 ("assumed free").
    """

    grid: np.ndarray
    center: CellPos
    half_width: int

    def window_bounds(self) -> tuple[slice, slice]:
        height, width = self.grid.shape
        return window_slices(width, height, self.center, self.half_width)


def window_slices(width: int, height: int, center: CellPos, half_width: int) -> tuple[slice, slice]:
    """Row and column slices of the receptive window clipped to the grid."""
    rows = slice(max(0, center.y - half_width), min(height, center.y + half_width + 1))
    cols = slice(max(0, center.x - half_width), min(width, center.x + half_width + 1))
    return rows, cols


def _as_positions(values: Iterable[Sequence[int]]) -> tuple[CellPos, ...]:
    return tuple(CellPos(int(v[0]), int(v[1])) for v in values)


@dataclass(frozen=True, eq=False)
class EpisodeConfig:
    """One multi-robot navigation instance plus its sensing/communication parameters."""

    grid: OccupancyGrid
    starts: tuple[CellPos, ...]
    goal_lists: tuple[tuple[CellPos, ...], ...]
    half_width: int = 3
    comm_range: int = 8
    noise: float = 0.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "starts", _as_positions(self.starts))
        object.__setattr__(
            self, "goal_lists", tuple(_as_positions(goals) for goals in self.goal_lists)
        )
        if len(self.starts) < 1:
            raise ConfigurationError("An episode needs at least one robot")
        if len(self.goal_lists) != len(self.starts):
            raise ConfigurationError(
                "Every robot needs a goal list",
                robots=len(self.starts),
                goal_lists=len(self.goal_lists),
            )
        if self.half_width < 0 or self.comm_range < 0:
            raise ConfigurationError("Receptive field and communication range must be >= 0")
        if not 0.0 <= self.noise <= 1.0:
            raise ConfigurationError(f"Flip probability must be in [0, 1], got {self.noise}")
        for robot, (start, goals) in enumerate(zip(self.starts, self.goal_lists, strict=True)):
            if not goals:
                raise ConfigurationError(f"Robot {robot} has no goals")
            if not self.grid.is_free(start):
                raise ConfigurationError(f"Robot {robot} starts on a blocked cell {start}")
            for goal in goals:
                if not self.grid.is_free(goal):
                    raise ConfigurationError(f"Robot {robot} has a blocked goal {goal}")
                if not self.grid.connected(start, goal):
                    raise ConfigurationError(
                        f"Robot {robot} goal {goal} is unreachable from {start}"
                    )

    @property
    def num_robots(self) -> int:
        return len(self.starts)
