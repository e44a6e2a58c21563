"""
Experiment grids: one-at-a-time sweeps around a default point, each point run
for a number of trials with the learned stack and, when asked for, the oracle
baseline. Embedding-size points swap in the memory network trained for that H.

Trials use common random numbers: trial ``k`` of every point shares the same
map, starts and goal chains (generated for the largest robot/goal counts of
the experiment and truncated), so points differ only in the swept parameter.
"""

import csv
import json
import logging
from collections.abc import Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

from core.exceptions import ConfigurationError, GenerationError, SamplingError
from gridworld.generators import generate_map, sample_goal_chain
from gridworld.types import EpisodeConfig, MapFamily
from memory.network import MemoryNetwork
from planner.network import ValueIterationNetwork
from planner.policies import VINPlanner

from .engine import run_episode, run_oracle_baseline
from .metrics import asa, spl, spl_by_goal_index, spl_of_legs
from .transcript import Record, TranscriptWriter
from .types import EpisodeResult, Method, SimulationOptions

logger = logging.getLogger(__name__)

SWEEPABLE = ("robots", "comm_range", "half_width", "noise", "goals", "embedding_size")
SWEEP_ALIASES = {"h": "embedding_size"}
MAX_MAP_REGENERATIONS = 50


@dataclass(frozen=True)
class ExperimentPoint:
    robots: int = 4
    comm_range: int = 8
    half_width: int = 3
    noise: float = 0.0
    goals: int = 1
    # None means the memory network given by --mm.
    embedding_size: int | None = None

    def __post_init__(self) -> None:
        if self.robots < 1 or self.goals < 1:
            raise ConfigurationError("Robots and goals per robot must be >= 1")
        if self.embedding_size is not None and self.embedding_size < 1:
            raise ConfigurationError(f"Embedding size must be >= 1, got {self.embedding_size}")

    @property
    def label(self) -> str:
        return ",".join(
            f"{f.name}={getattr(self, f.name)}" for f in fields(self) if getattr(self, f.name) is not None
        )


def parse_sweep(text: str) -> tuple[str, tuple[Any, ...]]:
    """``robots=1..6`` (inclusive integer range) or ``noise=0,0.02,0.05``."""
    name, sep, values = text.partition("=")
    name = name.strip().replace("-", "_")
    name = SWEEP_ALIASES.get(name.lower(), name)
    if not sep or not values.strip():
        raise ConfigurationError(f"Malformed sweep {text!r}; expected name=a..b or name=a,b,c")
    if name not in SWEEPABLE:
        raise ConfigurationError(f"Cannot sweep {name!r}", allowed=list(SWEEPABLE))
    cast = float if name == "noise" else int
    try:
        if ".." in values:
            low, high = (int(v) for v in values.split(".."))
            if high < low:
                raise ConfigurationError(f"Empty sweep range {values!r}")
            parsed = tuple(cast(v) for v in range(low, high + 1))
        else:
            parsed = tuple(cast(v) for v in values.split(","))
    except ValueError as exc:
        raise ConfigurationError(f"Malformed sweep values {values!r}: {exc}") from exc
    return name, parsed


def parse_checkpoint_map(text: str) -> dict[int, Path]:
    """``16=var/models/mm16,32=var/models/mm32`` to ``{16: Path(...), 32: Path(...)}``."""
    checkpoints: dict[int, Path] = {}
    for item in filter(None, (part.strip() for part in text.split(","))):
        size, sep, directory = item.partition("=")
        if not sep or not directory.strip():
            raise ConfigurationError(f"Malformed checkpoint entry {item!r}; expected H=DIR")
        try:
            checkpoints[int(size)] = Path(directory.strip())
        except ValueError as exc:
            raise ConfigurationError(f"Embedding size {size!r} is not an integer") from exc
    return checkpoints


@dataclass(frozen=True)
class ExperimentSpec:
    base: ExperimentPoint = field(default_factory=ExperimentPoint)
    sweeps: tuple[tuple[str, tuple[Any, ...]], ...] = ()
    trials: int = 100
    seed: int = 0
    family: MapFamily = MapFamily.COMPLEX
    width: int = 16
    height: int = 16
    methods: tuple[Method, ...] = (Method.LEARNED, Method.ORACLE)
    options: SimulationOptions = field(default_factory=SimulationOptions)

    def points(self) -> list[ExperimentPoint]:
        if not self.sweeps:
            return [self.base]
        return [replace(self.base, **{name: value}) for name, values in self.sweeps for value in values]

    @property
    def max_robots(self) -> int:
        return max(p.robots for p in self.points())

    @property
    def max_goals(self) -> int:
        return max(p.goals for p in self.points())

    @property
    def k_iterations(self) -> int:
        """VIN iterations on this experiment's maps, whatever K the checkpoint was trained with."""
        return self.width + self.height

    def methods_for(self, point: ExperimentPoint) -> tuple[Method, ...]:
        # The oracle has no embedding, so H points only run the learned stack.
        if point.embedding_size is not None:
            return tuple(m for m in self.methods if m is Method.LEARNED)
        return self.methods


def make_episode_config(
    point: ExperimentPoint,
    spec: ExperimentSpec,
    trial: int,
) -> EpisodeConfig:
    """The trial's instance truncated to the point's robot and goal counts."""
    rng = np.random.default_rng([spec.seed, trial])
    for _ in range(MAX_MAP_REGENERATIONS):
        try:
            grid = generate_map(spec.family, spec.width, spec.height, rng=rng)
            chains = [sample_goal_chain(grid, spec.family, spec.max_goals, rng) for _ in range(spec.max_robots)]
        except (GenerationError, SamplingError):
            continue
        noise_seed = int(np.random.default_rng([spec.seed, trial, 1]).integers(2**31))
        return EpisodeConfig(
            grid=grid,
            starts=tuple(start for start, _ in chains[: point.robots]),
            goal_lists=tuple(goals[: point.goals] for _, goals in chains[: point.robots]),
            half_width=point.half_width,
            comm_range=point.comm_range,
            noise=point.noise,
            rng_seed=noise_seed,
        )
    raise SamplingError(f"No usable instance for trial {trial}", attempts=MAX_MAP_REGENERATIONS)


@dataclass(frozen=True)
class TrialTask:
    point: ExperimentPoint
    spec: ExperimentSpec
    trial: int
    method: Method
    mm_dir: Path | None
    vin_dir: Path | None
    record_transcript: bool = False


_MODEL_CACHE: dict[tuple[str, str, int | None], tuple[MemoryNetwork, VINPlanner]] = {}


def load_models(
    mm_dir: Path, vin_dir: Path, k_iterations: int | None = None
) -> tuple[MemoryNetwork, VINPlanner]:
    """Checkpoints are read once per process; ``k_iterations`` overrides the stored K."""
    key = (str(mm_dir), str(vin_dir), k_iterations)
    if key not in _MODEL_CACHE:
        _MODEL_CACHE[key] = (
            MemoryNetwork.load(mm_dir),
            VINPlanner(ValueIterationNetwork.load(vin_dir, k_iterations=k_iterations)),
        )
    return _MODEL_CACHE[key]


def _run_trial(task: TrialTask) -> tuple[EpisodeResult, list[Record]]:
    cfg = make_episode_config(task.point, task.spec, task.trial)
    records: list[Record] = []
    transcript = records if task.record_transcript else None
    if task.method is Method.ORACLE:
        result = run_oracle_baseline(cfg, task.spec.options, transcript, task.trial)
    else:
        if task.mm_dir is None or task.vin_dir is None:
            raise ConfigurationError("The learned method needs MM and VIN checkpoints")
        memory, planner = load_models(task.mm_dir, task.vin_dir, task.spec.k_iterations)
        result = run_episode(cfg, memory, planner, task.spec.options, Method.LEARNED, transcript, task.trial)
    return result, records


@dataclass(frozen=True)
class PointResult:
    point: ExperimentPoint
    method: Method
    trials: int
    mean_asa: float
    mean_spl: float
    std_spl: float
    seeds: tuple[tuple[int, int], ...]
    message_bits: int
    spl_by_goal_index: dict[int, float]

    def to_dict(self) -> dict[str, Any]:
        return {
            "point": asdict(self.point),
            "label": self.point.label,
            "method": self.method.value,
            "trials": self.trials,
            "mean_asa": self.mean_asa,
            "mean_spl": self.mean_spl,
            "std_spl": self.std_spl,
            "seeds": [list(s) for s in self.seeds],
            "message_bits": self.message_bits,
            "spl_by_goal_index": {str(k): v for k, v in self.spl_by_goal_index.items()},
        }


def summarize(point: ExperimentPoint, method: Method, seed: int, results: Sequence[EpisodeResult]) -> PointResult:
    per_trial = [spl_of_legs(r.legs) for r in results]
    return PointResult(
        point=point,
        method=method,
        trials=len(results),
        mean_asa=asa(results),
        mean_spl=spl(results),
        std_spl=float(np.std(per_trial)),
        seeds=tuple((seed, trial) for trial in range(len(results))),
        message_bits=int(results[0].config["message_bits"]),
        spl_by_goal_index=spl_by_goal_index(results),
    )


def run_point(
    point: ExperimentPoint,
    spec: ExperimentSpec,
    method: Method,
    mm_dir: Path | None = None,
    vin_dir: Path | None = None,
    workers: int = 1,
    transcript_path: Path | None = None,
) -> PointResult:
    """Runs every trial of one point; results are gathered in trial order."""
    tasks = [
        TrialTask(point, spec, trial, method, mm_dir, vin_dir, transcript_path is not None)
        for trial in range(spec.trials)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_run_trial, tasks))
    else:
        outputs = [_run_trial(task) for task in tasks]

    if transcript_path is not None:
        transcript_path.parent.mkdir(parents=True, exist_ok=True)
        with transcript_path.open("w", encoding="utf-8") as stream:
            writer = TranscriptWriter(stream)
            for _, records in outputs:
                writer.write_all(records)

    summary = summarize(point, method, spec.seed, [result for result, _ in outputs])
    logger.info(
        f"{method.value} {point.label}: SPL {summary.mean_spl:.3f} ± {summary.std_spl:.3f}, "
        f"ASA {summary.mean_asa:.1f}% over {summary.trials} trials"
    )
    return summary


def run_experiment_grid(
    spec: ExperimentSpec,
    mm_dir: Path | None = None,
    vin_dir: Path | None = None,
    workers: int = 1,
    transcript_dir: Path | None = None,
    mm_by_size: Mapping[int, Path] | None = None,
) -> list[PointResult]:
    """
    Every point of ``spec`` for each of its methods, in point then method order.

    Points with an ``embedding_size`` use the checkpoint ``mm_by_size`` maps it to;
    all other learned points use ``mm_dir``.
    """
    if spec.trials < 1:
        raise ConfigurationError(f"Trials per point must be >= 1, got {spec.trials}")
    points = spec.points()
    memory_dirs = {
        index: _memory_dir(point, mm_dir, mm_by_size or {})
        for index, point in enumerate(points)
        if Method.LEARNED in spec.methods_for(point)
    }
    for index, directory in memory_dirs.items():
        memory, _ = load_models(directory, _required(vin_dir, "--vin"), spec.k_iterations)
        if (memory.width, memory.height) != (spec.width, spec.height):
            raise ConfigurationError(
                f"Memory network is {memory.width}x{memory.height}, maps are {spec.width}x{spec.height}"
            )
        expected = points[index].embedding_size
        if expected is not None and memory.embedding_size != expected:
            raise ConfigurationError(
                f"Checkpoint {directory} has H={memory.embedding_size}, expected H={expected}"
            )
    results = []
    for index, point in enumerate(points):
        for method in spec.methods_for(point):
            path = None
            if transcript_dir is not None:
                path = transcript_dir / f"point{index:02d}-{method.value}.jsonl"
            results.append(run_point(point, spec, method, memory_dirs.get(index), vin_dir, workers, path))
    return results


def _memory_dir(point: ExperimentPoint, mm_dir: Path | None, mm_by_size: Mapping[int, Path]) -> Path:
    if point.embedding_size is None:
        return _required(mm_dir, "--mm")
    if point.embedding_size not in mm_by_size:
        raise ConfigurationError(
            f"No memory network checkpoint for H={point.embedding_size}", available=sorted(mm_by_size)
        )
    return mm_by_size[point.embedding_size]


def _required(path: Path | None, flag: str) -> Path:
    if path is None:
        raise ConfigurationError(f"{flag} checkpoint directory is required for the learned method")
    return path


RESULT_COLUMNS = ("point", "method", "trials", "mean_asa", "mean_spl", "std_spl")


def write_results_csv(path: Path, results: Sequence[PointResult]) -> None:
    with path.open("w", encoding="utf-8", newline="") as stream:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for r in results:
            writer.writerow(
                [r.point.label, r.method.value, r.trials, f"{r.mean_asa:.4f}", f"{r.mean_spl:.6f}", f"{r.std_spl:.6f}"]
            )


def write_results_json(path: Path, spec: ExperimentSpec, results: Sequence[PointResult]) -> None:
    map_bits = spec.width * spec.height
    learned_bits = {r.message_bits for r in results if r.method is Method.LEARNED}
    payload = {
        "family": spec.family.value,
        "width": spec.width,
        "height": spec.height,
        "seed": spec.seed,
        "trials": spec.trials,
        "message_bits": {
            "oracle": map_bits,
            "mm-vin": min(learned_bits) if learned_bits else None,
        },
        "compression_ratio": (map_bits / (min(learned_bits) / 32)) if learned_bits else None,
        "points": [r.to_dict() for r in results],
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
