"""Staged two-robot encounters: what one received message adds to a robot's belief."""

import logging
from dataclasses import dataclass

import numpy as np

from core.exceptions import ConfigurationError
from gridworld.generators import generate_map
from gridworld.types import CellPos, MapFamily, OccupancyGrid
from gridworld.world import observe
from memory.types import AggregatorKind, MemoryModel
from planner.network import ValueIterationNetwork

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Encounter:
    grid: OccupancyGrid
    receiver_cells: tuple[CellPos, ...]
    sender_cells: tuple[CellPos, ...]
    goal: CellPos
    before: np.ndarray
    after: np.ndarray
    sender_belief: np.ndarray
    confidence: np.ndarray | None

    @property
    def accuracy_before(self) -> float:
        return belief_accuracy(self.before, self.grid)

    @property
    def accuracy_after(self) -> float:
        return belief_accuracy(self.after, self.grid)


def belief_accuracy(belief: np.ndarray, grid: OccupancyGrid) -> float:
    """Fraction of cells whose thresholded belief matches the true map."""
    return float(np.mean((belief >= 0.5) == grid.cells.astype(bool)))


def _explore(
    memory: MemoryModel,
    grid: OccupancyGrid,
    cells: list[CellPos],
    half_width: int,
) -> np.ndarray:
    embedding = memory.empty_embedding()
    for pos in cells:
        window = observe(grid, pos, half_width).grid
        embedding = memory.aggregate(embedding, memory.encode(window), AggregatorKind.OBSERVATION)
    return embedding


def staged_encounter(
    memory: MemoryModel,
    grid: OccupancyGrid,
    rng: np.random.Generator,
    half_width: int = 3,
    views: int = 4,
    vin: ValueIterationNetwork | None = None,
) -> Encounter:
    """
    The receiver observes ``views`` random cells of the left half, the sender
    of the right half; the receiver then folds in the sender's embedding.
    """
    split = grid.width // 2
    left = [p for p in grid.free_cells() if p.x < split]
    right = [p for p in grid.free_cells() if p.x >= split]
    if not left or not right:
        raise ConfigurationError("Both halves of the map need free cells")
    receiver = [left[i] for i in rng.choice(len(left), size=min(views, len(left)), replace=False)]
    sender = [right[i] for i in rng.choice(len(right), size=min(views, len(right)), replace=False)]

    own = _explore(memory, grid, receiver, half_width)
    message = _explore(memory, grid, sender, half_width)
    merged = memory.aggregate(own, message, AggregatorKind.MESSAGE)
    after = memory.decode(merged)
    goal = sender[0]
    confidence = vin.render_confidence(after, goal) if vin is not None else None
    return Encounter(
        grid=grid,
        receiver_cells=tuple(receiver),
        sender_cells=tuple(sender),
        goal=goal,
        before=memory.decode(own),
        after=after,
        sender_belief=memory.decode(message),
        confidence=confidence,
    )


@dataclass(frozen=True)
class EncounterSummary:
    encounters: int
    mean_before: float
    mean_after: float

    @property
    def gain(self) -> float:
        return self.mean_after - self.mean_before


def encounter_study(
    memory: MemoryModel,
    family: MapFamily,
    encounters: int = 100,
    seed: int = 0,
    half_width: int = 3,
    views: int = 4,
) -> EncounterSummary:
    """Mean belief accuracy before and after the exchange over fresh maps."""
    if encounters < 1:
        raise ConfigurationError("Need at least one encounter")
    before, after = [], []
    for index in range(encounters):
        rng = np.random.default_rng([seed, index])
        grid = generate_map(family, memory.width, memory.height, rng=rng)
        encounter = staged_encounter(memory, grid, rng, half_width, views)
        before.append(encounter.accuracy_before)
        after.append(encounter.accuracy_after)
    summary = EncounterSummary(encounters, float(np.mean(before)), float(np.mean(after)))
    logger.info(f"Staged encounters: accuracy {summary.mean_before:.3f} -> {summary.mean_after:.3f}")
    return summary
