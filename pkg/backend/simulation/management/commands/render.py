"""
Render maps, beliefs and confidence maps as PGM/PPM images.
"""

import json
from argparse import ArgumentParser
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from django.conf import settings

from core.commands import MemnavCommand
from core.exceptions import ConfigurationError, TranscriptError
from core.imaging import (
    belief_error_image,
    belief_image,
    confidence_image,
    grid_image,
    save_pnm,
    scalar_image,
    write_matrix_csv,
)
from gridworld.container import Dataset
from gridworld.generators import generate_map
from gridworld.types import MapFamily
from memory.network import MemoryNetwork
from planner.network import ValueIterationNetwork
from simulation.staging import encounter_study, staged_encounter
from simulation.transcript import (
    audit_causality,
    episode_grid,
    metrics_from_transcript,
    read_transcript,
    split_episodes,
    unpack_belief,
)


@dataclass(frozen=True)
class RenderConfig:
    transcript: Path | None = None
    dataset: Path | None = None
    staged: bool = False
    mm: Path | None = None
    vin: Path | None = None
    family: MapFamily = MapFamily.COMPLEX
    encounters: int = 100
    views: int = 4
    half_width: int = 3
    limit: int = 10
    scale: int = 1
    seed: int = 0
    out: Path = Path("var/render")

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", MapFamily(self.family))
        if self.staged and (self.mm is None or self.vin is None):
            raise ConfigurationError("--staged needs --mm and --vin checkpoints")
        if not self.staged and self.transcript is None and self.dataset is None:
            raise ConfigurationError("Give --transcript, --dataset or --staged")
        if self.scale < 1:
            raise ConfigurationError("Scale must be >= 1")


class Command(MemnavCommand):
    help = "Render true maps, belief maps (errors colour-coded) and confidence maps"
    run_name = "render"

    def add_command_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument("--transcript", type=Path, help="Episode transcript (JSON lines)")
        parser.add_argument("--dataset", type=Path, help="Dataset directory; renders its maps")
        parser.add_argument("--staged", action="store_true", default=None, help="Staged two-robot encounter")
        parser.add_argument("--mm", type=Path)
        parser.add_argument("--vin", type=Path)
        parser.add_argument("--family", choices=[f.value for f in MapFamily])
        parser.add_argument("--encounters", type=int)
        parser.add_argument("--views", type=int)
        parser.add_argument("--half-width", type=int)
        parser.add_argument("--limit", type=int, help="Maximum maps or episodes to render")
        parser.add_argument("--scale", type=int, help="Pixels per cell")
        parser.add_argument("--seed", type=int)
        parser.add_argument("--out", type=Path)

    def execute_command(self, **options: Any) -> None:
        keys = (
            "transcript", "dataset", "staged", "mm", "vin", "family", "encounters", "views",
            "half_width", "limit", "scale", "seed", "out",
        )
        overrides = {key: options.get(key) for key in keys}
        fallbacks = {"out": Path(settings.MEMNAV_DATA_ROOT) / "render"}
        config = self.resolve(RenderConfig, options, overrides, fallbacks)

        with self.tracked(config, config.out, config.seed) as run:
            written: list[Path] = []
            summary: dict[str, Any] = {}
            if config.staged and config.mm is not None and config.vin is not None:
                summary["staged"] = self._render_staged(config, config.mm, config.vin, written)
            elif config.transcript is not None:
                summary["transcript"] = self._render_transcript(config, config.transcript, written)
            elif config.dataset is not None:
                self._render_dataset(config, config.dataset, written)
            summary["images"] = len(written)
            run.summary = summary

        self.stdout.write(self.style.SUCCESS(f"✓ Wrote {len(written)} images to {config.out}"))

    def _save(self, image: Any, path: Path, config: RenderConfig, written: list[Path]) -> None:
        written.append(save_pnm(image, path, config.scale))

    def _render_dataset(self, config: RenderConfig, directory: Path, written: list[Path]) -> None:
        dataset = Dataset.load(directory)
        for index, record in enumerate(dataset.episodes[: config.limit]):
            self._save(grid_image(record.grid.cells), config.out / f"map{index:04d}", config, written)

    def _render_transcript(self, config: RenderConfig, path: Path, written: list[Path]) -> dict[str, Any]:
        records = list(read_transcript(path))
        episodes = split_episodes(records)
        if not episodes:
            raise TranscriptError("Transcript holds no episodes")
        audit = audit_causality(records)
        asa, spl = metrics_from_transcript(records)

        beliefs_found = 0
        for episode in episodes[: config.limit]:
            header = episode[0]
            grid = episode_grid(header)
            stem = config.out / f"episode{header['episode']:04d}-{header['method']}"
            self._save(grid_image(grid.cells), stem.with_name(stem.name + "-map"), config, written)
            last: dict[int, str] = {}
            for record in episode:
                if record["type"] == "step" and "belief" in record:
                    last[record["robot"]] = record["belief"]
            for robot, payload in sorted(last.items()):
                belief = unpack_belief(payload, grid.width, grid.height)
                name = f"{stem.name}-robot{robot}"
                self._save(belief_image(belief), stem.with_name(name + "-belief"), config, written)
                self._save(belief_error_image(belief, grid.cells), stem.with_name(name + "-errors"), config, written)
                beliefs_found += 1
        if beliefs_found == 0:
            self.stdout.write(self.style.WARNING("No beliefs recorded; rerun eval with --record-beliefs"))

        report = {
            "asa": asa,
            "spl": spl,
            "messages_checked": audit.messages,
            "causality_violations": audit.violations,
        }
        config.out.mkdir(parents=True, exist_ok=True)
        (config.out / "transcript_audit.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        style = self.style.SUCCESS if audit.passed else self.style.ERROR
        self.stdout.write(style(f"  Causality audit: {audit.messages} messages, {len(audit.violations)} violations"))
        self.stdout.write(f"  Recomputed ASA {asa:.2f}%  SPL {spl:.3f}")
        return report

    def _render_staged(
        self, config: RenderConfig, mm_dir: Path, vin_dir: Path, written: list[Path]
    ) -> dict[str, Any]:
        memory = MemoryNetwork.load(mm_dir)
        vin = ValueIterationNetwork.load(vin_dir)
        rng = np.random.default_rng([config.seed, 0])
        grid = generate_map(config.family, memory.width, memory.height, rng=rng)
        encounter = staged_encounter(memory, grid, rng, config.half_width, config.views, vin)

        out = config.out
        self._save(grid_image(grid.cells), out / "map", config, written)
        self._save(belief_image(encounter.before), out / "belief-before", config, written)
        self._save(belief_image(encounter.after), out / "belief-after", config, written)
        self._save(belief_error_image(encounter.before, grid.cells), out / "errors-before", config, written)
        self._save(belief_error_image(encounter.after, grid.cells), out / "errors-after", config, written)
        self._save(belief_image(encounter.sender_belief), out / "sender-belief", config, written)
        if encounter.confidence is not None:
            self._save(confidence_image(encounter.confidence), out / "confidence", config, written)
            write_matrix_csv(out / "confidence.csv", encounter.confidence)
        values = vin.q_values(encounter.after, encounter.goal).max(axis=0)
        self._save(scalar_image(values), out / "value", config, written)

        study = encounter_study(memory, config.family, config.encounters, config.seed, config.half_width, config.views)
        report = {
            "accuracy_before": encounter.accuracy_before,
            "accuracy_after": encounter.accuracy_after,
            "mean_accuracy_before": study.mean_before,
            "mean_accuracy_after": study.mean_after,
            "encounters": study.encounters,
        }
        (out / "staged.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        self.stdout.write(
            f"  Belief accuracy {encounter.accuracy_before:.3f} -> {encounter.accuracy_after:.3f} "
            f"(mean over {study.encounters}: {study.mean_before:.3f} -> {study.mean_after:.3f})"
        )
        return report
