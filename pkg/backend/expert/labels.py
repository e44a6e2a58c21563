"""Imitation-learning labels from the BFS expert."""

import logging

import numpy as np

from core.exceptions import ConfigurationError, GenerationError, SamplingError
from gridworld.container import EpisodeRecord, LabeledSample
from gridworld.generators import generate_map, sample_goal_chain
from gridworld.types import CellPos, MapFamily, OccupancyGrid

from .bfs import action_mask, bfs_field, expert_path, optimal_actions

logger = logging.getLogger(__name__)


def label_state(grid: OccupancyGrid, pos: CellPos, goal: CellPos) -> LabeledSample:
    field = bfs_field(grid, goal)
    return LabeledSample(grid, pos, goal, action_mask(optimal_actions(field, pos)))


def episode_labels(record: EpisodeRecord, count: int, rng: np.random.Generator) -> list[LabeledSample]:
    """
    Exactly ``count`` labeled states for one episode's map.

    States are drawn from the expert trajectories of every robot's legs, topped
    up with uniformly random reachable cells when the trajectories are shorter.
    """
    if count < 1:
        raise ConfigurationError(f"Labels per map must be >= 1, got {count}")
    grid = record.grid
    candidates: list[LabeledSample] = []
    fields = {}
    for start, goals in zip(record.starts, record.goal_lists, strict=True):
        pos = start
        for goal in goals:
            field = fields.setdefault(goal, bfs_field(grid, goal))
            for state in expert_path(field, pos)[:-1]:
                candidates.append(
                    LabeledSample(grid, state, goal, action_mask(optimal_actions(field, state)))
                )
            pos = goal

    if len(candidates) >= count:
        chosen = rng.choice(len(candidates), size=count, replace=False)
        return [candidates[int(i)] for i in sorted(chosen)]

    samples = list(candidates)
    goals = sorted(fields)
    while len(samples) < count:
        goal = goals[int(rng.integers(len(goals)))]
        field = fields[goal]
        reachable = [p for p in grid.free_cells() if field.is_reachable(p) and p != goal]
        pos = reachable[int(rng.integers(len(reachable)))]
        samples.append(LabeledSample(grid, pos, goal, action_mask(optimal_actions(field, pos))))
    return samples


def generate_labeled_samples(
    family: MapFamily | str,
    width: int,
    height: int,
    count: int,
    rng: np.random.Generator,
    per_map: int = 20,
    max_regenerations: int = 50,
) -> list[LabeledSample]:
    """Fresh maps with one start/goal each, labeled until ``count`` samples exist."""
    family = MapFamily(family)
    samples: list[LabeledSample] = []
    failures = 0
    while len(samples) < count:
        try:
            grid = generate_map(family, width, height, rng=rng)
            start, goals = sample_goal_chain(grid, family, 1, rng)
        except SamplingError:
            failures += 1
            if failures > max_regenerations:
                raise GenerationError(
                    "Too many maps without a qualifying start/goal pair", attempts=failures
                ) from None
            continue
        record = EpisodeRecord(grid, (start,), (goals,))
        samples.extend(episode_labels(record, min(per_map, count - len(samples)), rng))
    logger.debug(f"Generated {len(samples)} labeled samples ({failures} map regenerations)")
    return samples
