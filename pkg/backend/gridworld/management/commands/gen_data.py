"""
Generate a map/episode dataset with expert action labels.
"""

from argparse import ArgumentParser
from pathlib import Path
from typing import Any

from django.conf import settings

from core.commands import MemnavCommand
from expert.datasets import GenDataConfig, build_dataset
from gridworld.types import MapFamily


class Command(MemnavCommand):
    help = "Generate Simple or Complex maps, episodes and expert-labeled samples"
    run_name = "gen-data"

    def add_command_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument("--family", choices=[f.value for f in MapFamily], help="Map family")
        parser.add_argument("--size", type=int, help="Square map side (sets width and height)")
        parser.add_argument("--width", type=int)
        parser.add_argument("--height", type=int)
        parser.add_argument("--count", type=int, help="Number of maps")
        parser.add_argument("--seed", type=int)
        parser.add_argument("--fill", type=float, help="Target obstacle fraction")
        parser.add_argument("--robots", type=int, help="Robots (start/goal chains) per map")
        parser.add_argument("--goals", type=int, help="Goals per robot")
        parser.add_argument("--labels-per-map", type=int, help="Expert-labeled states per map (0 = none)")
        parser.add_argument("--workers", type=int, help="Worker processes")
        parser.add_argument("--out", type=Path, help="Output dataset directory")

    def execute_command(self, **options: Any) -> None:
        size = options.get("size")
        overrides = {
            "family": options.get("family"),
            "width": options.get("width") or size,
            "height": options.get("height") or size,
            "count": options.get("count"),
            "seed": options.get("seed"),
            "fill": options.get("fill"),
            "robots": options.get("robots"),
            "goals": options.get("goals"),
            "labels_per_map": options.get("labels_per_map"),
            "workers": options.get("workers"),
            "out": options.get("out"),
        }
        fallbacks = {"workers": settings.MEMNAV_WORKERS, "out": Path(settings.MEMNAV_DATA_ROOT) / "data"}
        config = self.resolve(GenDataConfig, options, overrides, fallbacks)

        with self.tracked(config, config.out, config.seed) as run:
            manifest = build_dataset(config)
            run.summary = {
                "count": manifest["count"],
                "label_count": manifest["label_count"],
                "fill_mean": manifest["fill"]["mean"],
            }

        fill = manifest["fill"]["mean"]
        self.stdout.write(
            self.style.SUCCESS(
                f"✓ Wrote {manifest['count']} {manifest['family']} maps "
                f"({manifest['label_count']} labels) to {config.out}"
            )
        )
        if fill is not None:
            self.stdout.write(f"  Mean obstacle fill: {fill:.3f} (target {manifest['fill']['target']:.2f})")
