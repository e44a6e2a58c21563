"""
Dataset generation for ``gen-data``.

Map ``i`` is produced from its own generator ``default_rng([seed, i])``, so the
output is the same whatever the worker count.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from core.exceptions import ConfigurationError, GenerationError, SamplingError
from gridworld.container import (
    EPISODES_FILE,
    FORMAT_VERSION,
    LABELS_FILE,
    MAGIC,
    EpisodeRecord,
    LabeledSample,
    is_test_index,
    write_manifest,
    write_records,
)
from gridworld.generators import generate_map, sample_goal_chain
from gridworld.types import MapFamily

from .labels import episode_labels

logger = logging.getLogger(__name__)

MAX_MAP_REGENERATIONS = 50


@dataclass(frozen=True)
class GenDataConfig:
    family: MapFamily = MapFamily.COMPLEX
    width: int = 16
    height: int = 16
    count: int = 1000
    seed: int = 0
    fill: float | None = None
    robots: int = 1
    goals: int = 1
    labels_per_map: int = 20
    workers: int = 1
    out: Path = Path("var/data")

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", MapFamily(self.family))
        if self.count < 0:
            raise ConfigurationError(f"Map count must be >= 0, got {self.count}")
        if self.robots < 1 or self.goals < 1:
            raise ConfigurationError("Robots and goals per robot must be >= 1")
        if self.labels_per_map < 0:
            raise ConfigurationError("Labels per map must be >= 0")
        if self.workers < 1:
            raise ConfigurationError("Workers must be >= 1")

    @property
    def target_fill(self) -> float:
        return self.family.default_fill if self.fill is None else self.fill


def generate_entry(config: GenDataConfig, index: int) -> tuple[EpisodeRecord, list[LabeledSample]]:
    """One map with every robot's start and goal chain, plus its expert labels."""
    rng = np.random.default_rng([config.seed, index])
    for _ in range(MAX_MAP_REGENERATIONS):
        grid = generate_map(config.family, config.width, config.height, config.target_fill, rng)
        try:
            chains = [sample_goal_chain(grid, config.family, config.goals, rng) for _ in range(config.robots)]
        except SamplingError:
            continue
        record = EpisodeRecord(
            grid,
            tuple(start for start, _ in chains),
            tuple(goals for _, goals in chains),
        )
        labels = episode_labels(record, config.labels_per_map, rng) if config.labels_per_map else []
        return record, labels
    raise GenerationError(f"Map {index} never admitted a qualifying episode", attempts=MAX_MAP_REGENERATIONS)


def _generate(task: tuple[GenDataConfig, int]) -> tuple[EpisodeRecord, list[LabeledSample]]:
    return generate_entry(*task)


def build_dataset(config: GenDataConfig) -> dict[str, Any]:
    """Writes ``episodes.bin``, ``labels.bin`` and ``manifest.json``; returns the manifest."""
    tasks = [(config, index) for index in range(config.count)]
    if config.workers > 1 and tasks:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            entries = list(pool.map(_generate, tasks, chunksize=max(1, len(tasks) // (4 * config.workers))))
    else:
        entries = [_generate(task) for task in tasks]

    episodes = [record for record, _ in entries]
    labels = [sample for _, samples in entries for sample in samples]
    out = config.out
    out.mkdir(parents=True, exist_ok=True)
    write_records(out / EPISODES_FILE, episodes)
    write_records(out / LABELS_FILE, labels)

    fills = [record.grid.occupied_fraction() for record in episodes]
    test_maps = sum(1 for i in range(config.count) if is_test_index(i))
    manifest = {
        "format": MAGIC.decode("ascii"),
        "version": FORMAT_VERSION,
        "family": config.family.value,
        "width": config.width,
        "height": config.height,
        "count": config.count,
        "seed": config.seed,
        "robots": config.robots,
        "goals": config.goals,
        "labels_per_map": config.labels_per_map,
        "label_count": len(labels),
        "train_maps": config.count - test_maps,
        "test_maps": test_maps,
        "fill": {
            "target": config.target_fill,
            "mean": float(np.mean(fills)) if fills else None,
            "min": float(np.min(fills)) if fills else None,
            "max": float(np.max(fills)) if fills else None,
        },
        "files": {"episodes": EPISODES_FILE, "labels": LABELS_FILE},
    }
    write_manifest(out, manifest)
    logger.info(f"Wrote {config.count} {config.family.value} maps and {len(labels)} labels to {out}")
    return manifest
