"""
Procedural map families and start/goal sampling.

Simple maps scatter non-overlapping tetrominoes; Complex maps are built by
recursive division into rooms joined by doors, then thickened until the
target occupied fraction is reached.
"""

import logging
from collections.abc import Callable

import numpy as np

from core.exceptions import ConfigurationError, GenerationError, SamplingError

from .types import CellPos, MapFamily, OccupancyGrid

logger = logging.getLogger(__name__)

FILL_TOLERANCE = 0.05
MIN_GENERATED_SIZE = 8
MAX_ROOM_SIZE = 4
MIN_CONNECTED_SHARE = 0.5

_TETROMINO_BASES: tuple[tuple[tuple[int, int], ...], ...] = (
    ((0, 0), (1, 0), (2, 0), (3, 0)),  # I
    ((0, 0), (1, 0), (0, 1), (1, 1)),  # O
    ((0, 0), (1, 0), (2, 0), (1, 1)),  # T
    ((1, 0), (2, 0), (0, 1), (1, 1)),  # S
    ((0, 0), (1, 0), (1, 1), (2, 1)),  # Z
    ((0, 0), (0, 1), (0, 2), (1, 2)),  # L
    ((1, 0), (1, 1), (1, 2), (0, 2)),  # J
)


def _normalize(cells: list[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    min_x = min(x for x, _ in cells)
    min_y = min(y for _, y in cells)
    return tuple(sorted((x - min_x, y - min_y) for x, y in cells))


def _all_rotations() -> tuple[np.ndarray, ...]:
    shapes: set[tuple[tuple[int, int], ...]] = set()
    for base in _TETROMINO_BASES:
        cells = list(base)
        for _ in range(4):
            shapes.add(_normalize(cells))
            cells = [(-y, x) for x, y in cells]
    return tuple(np.array(shape, dtype=np.int64) for shape in sorted(shapes))


TETROMINO_SHAPES = _all_rotations()


def _check_request(width: int, height: int, target_fill: float) -> None:
    if width < MIN_GENERATED_SIZE or height < MIN_GENERATED_SIZE:
        raise ConfigurationError(
            f"Generated maps must be at least {MIN_GENERATED_SIZE}x{MIN_GENERATED_SIZE}",
            width=width,
            height=height,
        )
    if not 0.0 < target_fill < 0.5:
        raise ConfigurationError(f"Target fill must be in (0, 0.5), got {target_fill}")


def generate_simple_map(
    width: int,
    height: int,
    target_fill: float = MapFamily.SIMPLE.default_fill,
    rng: np.random.Generator | None = None,
    max_attempts: int = 100,
) -> OccupancyGrid:
    """Place random non-overlapping tetrominoes until the fill is within tolerance."""
    _check_request(width, height, target_fill)
    rng = rng if rng is not None else np.random.default_rng()
    total = width * height
    upper = target_fill + FILL_TOLERANCE

    for _ in range(max_attempts):
        cells = np.zeros((height, width), dtype=np.uint8)
        occupied = 0
        stuck = False
        while occupied / total < target_fill and (occupied + 4) / total <= upper:
            if not _place_tetromino(cells, rng):
                stuck = True
                break
            occupied += 4
        fill = occupied / total
        if stuck or abs(fill - target_fill) > FILL_TOLERANCE:
            continue
        grid = OccupancyGrid(cells)
        if grid.largest_component_share() >= MIN_CONNECTED_SHARE:
            return grid
    raise GenerationError(
        f"Could not generate a {width}x{height} simple map with fill {target_fill}",
        attempts=max_attempts,
    )


def _place_tetromino(cells: np.ndarray, rng: np.random.Generator, tries: int = 200) -> bool:
    height, width = cells.shape
    for _ in range(tries):
        shape = TETROMINO_SHAPES[int(rng.integers(len(TETROMINO_SHAPES)))]
        span_x = int(shape[:, 0].max()) + 1
        span_y = int(shape[:, 1].max()) + 1
        ox = int(rng.integers(0, width - span_x + 1))
        oy = int(rng.integers(0, height - span_y + 1))
        xs = shape[:, 0] + ox
        ys = shape[:, 1] + oy
        if cells[ys, xs].any():
            continue
        cells[ys, xs] = 1
        return True
    return False


def generate_complex_map(
    width: int,
    height: int,
    target_fill: float = MapFamily.COMPLEX.default_fill,
    rng: np.random.Generator | None = None,
    max_attempts: int = 100,
) -> OccupancyGrid:
    """
    Recursive division into rooms no larger than 4×4, one door per wall, then
    random wall thickening that never blocks a door or disconnects free space.
    """
    _check_request(width, height, target_fill)
    rng = rng if rng is not None else np.random.default_rng()
    lower = target_fill - FILL_TOLERANCE
    upper = target_fill + FILL_TOLERANCE

    for attempt in range(max_attempts):
        cells = np.zeros((height, width), dtype=np.uint8)
        doors: set[tuple[int, int]] = set()
        _divide(cells, doors, 0, 0, width, height, rng)
        if cells.mean() > upper:
            logger.debug(f"Division overshot fill on attempt {attempt}: {cells.mean():.3f}")
            continue
        if not _thicken(cells, doors, target_fill, rng):
            continue
        fill = float(cells.mean())
        if lower <= fill <= upper:
            return OccupancyGrid(cells)
    raise GenerationError(
        f"Could not generate a {width}x{height} complex map with fill {target_fill}",
        attempts=max_attempts,
    )


def _divide(
    cells: np.ndarray,
    doors: set[tuple[int, int]],
    x0: int,
    y0: int,
    w: int,
    h: int,
    rng: np.random.Generator,
) -> None:
    if w <= MAX_ROOM_SIZE and h <= MAX_ROOM_SIZE:
        return
    if w > h:
        vertical = True
    elif h > w:
        vertical = False
    else:
        vertical = bool(rng.integers(2))

    if vertical:
        # a wall must not sit in front of a door of the enclosing walls
        candidates = [
            x for x in range(x0 + 1, x0 + w - 1)
            if (x, y0 - 1) not in doors and (x, y0 + h) not in doors
        ]
        if not candidates:
            return
        wall_x = int(rng.choice(candidates))
        door_y = y0 + int(rng.integers(h))
        cells[y0:y0 + h, wall_x] = 1
        cells[door_y, wall_x] = 0
        doors.add((wall_x, door_y))
        _divide(cells, doors, x0, y0, wall_x - x0, h, rng)
        _divide(cells, doors, wall_x + 1, y0, x0 + w - wall_x - 1, h, rng)
    else:
        candidates = [
            y for y in range(y0 + 1, y0 + h - 1)
            if (x0 - 1, y) not in doors and (x0 + w, y) not in doors
        ]
        if not candidates:
            return
        wall_y = int(rng.choice(candidates))
        door_x = x0 + int(rng.integers(w))
        cells[wall_y, x0:x0 + w] = 1
        cells[wall_y, door_x] = 0
        doors.add((door_x, wall_y))
        _divide(cells, doors, x0, y0, w, wall_y - y0, rng)
        _divide(cells, doors, x0, wall_y + 1, w, y0 + h - wall_y - 1, rng)


def _thicken(
    cells: np.ndarray,
    doors: set[tuple[int, int]],
    target_fill: float,
    rng: np.random.Generator,
) -> bool:
    height, width = cells.shape
    total = width * height
    protected = {
        (x + dx, y + dy)
        for x, y in doors
        for dx in (-1, 0, 1)
        for dy in (-1, 0, 1)
    }
    rejected: set[tuple[int, int]] = set()
    while cells.sum() / total < target_fill:
        wall = cells.astype(bool)
        near_wall = np.zeros_like(wall)
        near_wall[1:, :] |= wall[:-1, :]
        near_wall[:-1, :] |= wall[1:, :]
        near_wall[:, 1:] |= wall[:, :-1]
        near_wall[:, :-1] |= wall[:, 1:]
        ys, xs = np.nonzero(near_wall & ~wall)
        candidates = [
            (int(x), int(y)) for y, x in zip(ys, xs, strict=True)
            if (int(x), int(y)) not in protected and (int(x), int(y)) not in rejected
        ]
        if not candidates:
            return False
        x, y = candidates[int(rng.integers(len(candidates)))]
        cells[y, x] = 1
        if OccupancyGrid(cells).largest_component_share() < 1.0:
            cells[y, x] = 0
            rejected.add((x, y))
    return True


MapGenerator = Callable[..., OccupancyGrid]

GENERATORS: dict[MapFamily, MapGenerator] = {
    MapFamily.SIMPLE: generate_simple_map,
    MapFamily.COMPLEX: generate_complex_map,
}


def generate_map(
    family: MapFamily | str,
    width: int,
    height: int,
    target_fill: float | None = None,
    rng: np.random.Generator | None = None,
) -> OccupancyGrid:
    family = MapFamily(family)
    fill = family.default_fill if target_fill is None else target_fill
    return GENERATORS[family](width, height, fill, rng)


def pair_qualifies(family: MapFamily, path_length: int, straight_distance: int) -> bool:
    """Family-specific start/goal constraint on shortest path L and Manhattan distance D."""
    if straight_distance < 2:
        return False
    if family is MapFamily.SIMPLE:
        return 2 * path_length < 3 * straight_distance
    return path_length >= 2 * straight_distance


def sample_goal(
    grid: OccupancyGrid,
    start: CellPos,
    family: MapFamily | str,
    rng: np.random.Generator,
) -> CellPos | None:
    """A random qualifying goal for ``start``, or ``None`` when none exists."""
    from expert.bfs import bfs_field

    family = MapFamily(family)
    field = bfs_field(grid, start)
    candidates = [
        pos for pos in grid.free_cells()
        if field.is_reachable(pos)
        and pair_qualifies(family, field.at(pos), start.manhattan(pos))
    ]
    if not candidates:
        return None
    return candidates[int(rng.integers(len(candidates)))]


def sample_start_goal(
    grid: OccupancyGrid,
    family: MapFamily | str,
    rng: np.random.Generator,
    max_attempts: int = 200,
) -> tuple[CellPos, CellPos]:
    """
    Uniform free start with a reachable goal satisfying the family constraint.

    Raises ``SamplingError`` after ``max_attempts`` starts; callers regenerate the map.
    """
    free = grid.free_cells()
    if not free:
        raise SamplingError("Map has no free cells", attempts=0)
    for _ in range(max_attempts):
        start = free[int(rng.integers(len(free)))]
        goal = sample_goal(grid, start, family, rng)
        if goal is not None:
            return start, goal
    raise SamplingError("No qualifying start/goal pair found", attempts=max_attempts)


def sample_goal_chain(
    grid: OccupancyGrid,
    family: MapFamily | str,
    goals: int,
    rng: np.random.Generator,
    max_attempts: int = 200,
) -> tuple[CellPos, tuple[CellPos, ...]]:
    """A start and ``goals`` consecutive goals, each leg satisfying the family constraint."""
    if goals < 1:
        raise ConfigurationError(f"Goals per robot must be >= 1, got {goals}")
    for _ in range(max_attempts):
        start, first = sample_start_goal(grid, family, rng, max_attempts)
        chain = [first]
        while len(chain) < goals:
            nxt = sample_goal(grid, chain[-1], family, rng)
            if nxt is None:
                break
            chain.append(nxt)
        if len(chain) == goals:
            return start, tuple(chain)
    raise SamplingError(f"No qualifying chain of {goals} goals found", attempts=max_attempts)
