"""
Run the decentralized evaluation grid for the learned stack and the oracle baseline.
"""

from argparse import ArgumentParser
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from django.conf import settings

from core.commands import MemnavCommand
from core.exceptions import ConfigurationError
from gridworld.types import MapFamily
from simulation.experiments import (
    ExperimentPoint,
    ExperimentSpec,
    parse_checkpoint_map,
    parse_sweep,
    run_experiment_grid,
    write_results_csv,
    write_results_json,
)
from simulation.types import Method, SimulationOptions


@dataclass(frozen=True)
class EvalConfig:
    mm: Path | None = None
    vin: Path | None = None
    # Memory network per embedding size for H sweeps, "16=DIR,32=DIR".
    mm_h: str = ""
    baseline: str = "none"
    learned: bool = True
    family: MapFamily = MapFamily.COMPLEX
    width: int = 16
    height: int = 16
    robots: int = 4
    comm_range: int = 8
    half_width: int = 3
    noise: float = 0.0
    goals: int = 1
    sweep: str = ""
    trials: int = 100
    seed: int = 0
    cap_multiplier: int = 3
    lenient_moves: bool = False
    final_broadcast_steps: int = 1
    detect_cycles: bool = False
    transcripts: bool = False
    record_beliefs: bool = False
    workers: int = 1
    out: Path = Path("var/eval")

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", MapFamily(self.family))
        if self.baseline not in ("oracle", "none"):
            raise ConfigurationError(f"Unknown baseline {self.baseline!r}")
        if not self.learned and self.baseline == "none":
            raise ConfigurationError("Nothing to evaluate: no learned method and no baseline")

    def spec(self) -> ExperimentSpec:
        methods = []
        if self.learned:
            methods.append(Method.LEARNED)
        if self.baseline == "oracle":
            methods.append(Method.ORACLE)
        return ExperimentSpec(
            base=ExperimentPoint(self.robots, self.comm_range, self.half_width, self.noise, self.goals),
            sweeps=tuple(parse_sweep(s) for s in self.sweep.split(";") if s.strip()),
            trials=self.trials,
            seed=self.seed,
            family=self.family,
            width=self.width,
            height=self.height,
            methods=tuple(methods),
            options=SimulationOptions(
                cap_multiplier=self.cap_multiplier,
                lenient_moves=self.lenient_moves,
                final_broadcast_steps=self.final_broadcast_steps,
                detect_cycles=self.detect_cycles,
                record_beliefs=self.record_beliefs,
            ),
        )


class Command(MemnavCommand):
    help = "Evaluate SPL and ASA over an experiment grid"
    run_name = "eval"

    def add_command_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument("--mm", type=Path, help="Memory network checkpoint directory")
        parser.add_argument("--vin", type=Path, help="VIN checkpoint directory")
        parser.add_argument("--mm-h", help="Memory network per embedding size for H sweeps: 16=DIR,32=DIR")
        parser.add_argument("--baseline", choices=["oracle", "none"], help="Also run the oracle baseline")
        parser.add_argument("--oracle-only", action="store_true", help="Run only the oracle baseline")
        parser.add_argument("--family", choices=[f.value for f in MapFamily])
        parser.add_argument("--size", type=int)
        parser.add_argument("--robots", type=int)
        parser.add_argument("--comm-range", type=int)
        parser.add_argument("--half-width", type=int)
        parser.add_argument("--noise", type=float)
        parser.add_argument("--goals", type=int)
        parser.add_argument("--sweep", action="append", help="name=a..b or name=a,b,c; repeatable")
        parser.add_argument("--trials", type=int)
        parser.add_argument("--seed", type=int)
        parser.add_argument("--cap-multiplier", type=int)
        parser.add_argument("--lenient-moves", action="store_true", default=None)
        parser.add_argument("--detect-cycles", action="store_true", default=None)
        parser.add_argument("--transcripts", action="store_true", default=None)
        parser.add_argument("--record-beliefs", action="store_true", default=None)
        parser.add_argument("--workers", type=int)
        parser.add_argument("--out", type=Path)

    def execute_command(self, **options: Any) -> None:
        keys = (
            "mm", "vin", "mm_h", "baseline", "family", "robots", "comm_range", "half_width", "noise", "goals",
            "sweep", "trials", "seed", "cap_multiplier", "lenient_moves", "detect_cycles",
            "transcripts", "record_beliefs", "workers", "out",
        )
        overrides = {key: options.get(key) for key in keys}
        overrides["width"] = overrides["height"] = options.get("size")
        if options.get("sweep"):
            overrides["sweep"] = ";".join(options["sweep"])
        if options.get("oracle_only"):
            overrides["learned"] = False
            overrides["baseline"] = "oracle"
        fallbacks = {"workers": settings.MEMNAV_WORKERS, "out": Path(settings.MEMNAV_DATA_ROOT) / "eval"}
        config = self.resolve(EvalConfig, options, overrides, fallbacks)
        spec = config.spec()

        with self.tracked(config, config.out, config.seed) as run:
            results = run_experiment_grid(
                spec,
                config.mm,
                config.vin,
                config.workers,
                config.out / "transcripts" if config.transcripts else None,
                parse_checkpoint_map(config.mm_h),
            )
            write_results_csv(config.out / "results.csv", results)
            write_results_json(config.out / "results.json", spec, results)
            for result in results:
                run.add_point(
                    method=result.method.value,
                    label=result.point.label,
                    point=result.to_dict()["point"],
                    trials=result.trials,
                    mean_asa=result.mean_asa,
                    mean_spl=result.mean_spl,
                    std_spl=result.std_spl,
                    seeds=[list(s) for s in result.seeds],
                )
            run.summary = {"points": len(results), "results": str(config.out / "results.csv")}

        self.stdout.write("")
        self.stdout.write(self.style.SUCCESS(f"Results ({spec.trials} trials per point)"))
        self.stdout.write("=" * 80)
        for result in results:
            self.stdout.write(
                f"  {result.method.value:7s} {result.point.label}: "
                f"SPL {result.mean_spl:.3f} ± {result.std_spl:.3f}  ASA {result.mean_asa:.1f}%"
            )
        self.stdout.write("=" * 80)
        self.stdout.write(self.style.SUCCESS(f"✓ Wrote {config.out / 'results.csv'}"))
