import csv
import json
from pathlib import Path

import numpy as np
import pytest

from core.exceptions import ConfigurationError
from gridworld.types import MapFamily
from memory.network import MemoryNetwork
from memory.types import MMArchitecture
from planner.network import ValueIterationNetwork
from simulation.experiments import (
    RESULT_COLUMNS,
    ExperimentPoint,
    ExperimentSpec,
    load_models,
    make_episode_config,
    parse_checkpoint_map,
    parse_sweep,
    run_experiment_grid,
    run_point,
    write_results_csv,
    write_results_json,
)
from simulation.transcript import read_transcript, split_episodes
from simulation.types import Method


def tiny_spec(**overrides) -> ExperimentSpec:
    values = {
        "base": ExperimentPoint(robots=2, comm_range=4, half_width=2),
        "trials": 2,
        "seed": 3,
        "family": MapFamily.SIMPLE,
        "width": 8,
        "height": 8,
        "methods": (Method.ORACLE,),
    }
    values.update(overrides)
    return ExperimentSpec(**values)


def test_parse_sweep_forms() -> None:
    assert parse_sweep("robots=1..4") == ("robots", (1, 2, 3, 4))
    assert parse_sweep("comm-range=2,8") == ("comm_range", (2, 8))
    assert parse_sweep("noise=0,0.05") == ("noise", (0.0, 0.05))
    assert parse_sweep("goals=3..3") == ("goals", (3,))
    assert parse_sweep("H=16,32,64") == ("embedding_size", (16, 32, 64))
    assert parse_sweep("embedding-size=8") == ("embedding_size", (8,))


@pytest.mark.parametrize("text", ["robots", "robots=", "speed=1,2", "robots=4..2", "robots=a,b", "noise=1..x"])
def test_parse_sweep_rejects(text: str) -> None:
    with pytest.raises(ConfigurationError):
        parse_sweep(text)


def test_point_label_and_validation() -> None:
    assert ExperimentPoint().label == "robots=4,comm_range=8,half_width=3,noise=0.0,goals=1"
    assert ExperimentPoint(embedding_size=16).label.endswith(",goals=1,embedding_size=16")
    with pytest.raises(ConfigurationError):
        ExperimentPoint(robots=0)
    with pytest.raises(ConfigurationError):
        ExperimentPoint(goals=0)
    with pytest.raises(ConfigurationError):
        ExperimentPoint(embedding_size=0)


def test_points_are_one_at_a_time_sweeps() -> None:
    spec = ExperimentSpec(sweeps=(("robots", (1, 6)), ("goals", (2,))))
    points = spec.points()
    assert [(p.robots, p.goals) for p in points] == [(1, 1), (6, 1), (4, 2)]
    assert all(p.comm_range == 8 for p in points)
    assert spec.max_robots == 6
    assert spec.max_goals == 2
    assert ExperimentSpec().points() == [ExperimentPoint()]


def test_trials_share_their_instance_across_points() -> None:
    spec = tiny_spec(sweeps=(("robots", (1, 3)), ("goals", (1, 2))))
    one, three = ExperimentPoint(robots=1, half_width=2), ExperimentPoint(robots=3, half_width=2)
    small = make_episode_config(one, spec, 0)
    large = make_episode_config(three, spec, 0)
    assert small.grid.equals(large.grid)
    assert small.starts == large.starts[:1]
    assert small.goal_lists == large.goal_lists[:1]
    assert len(large.starts) == 3
    assert all(len(goals) == 1 for goals in large.goal_lists)
    assert make_episode_config(three, spec, 0).starts == large.starts
    assert not make_episode_config(three, spec, 1).grid.equals(large.grid)


def test_run_point_with_transcript(tmp_path) -> None:
    spec = tiny_spec()
    path = tmp_path / "transcripts" / "point00-oracle.jsonl"
    result = run_point(spec.base, spec, Method.ORACLE, transcript_path=path)
    assert result.trials == 2
    assert result.seeds == ((3, 0), (3, 1))
    assert result.message_bits == 64
    assert 0.0 <= result.mean_spl <= 1.0
    assert 0.0 <= result.mean_asa <= 100.0
    assert len(split_episodes(list(read_transcript(path)))) == 2
    payload = result.to_dict()
    assert payload["label"] == spec.base.label
    assert all(isinstance(key, str) for key in payload["spl_by_goal_index"])


def test_results_files(tmp_path) -> None:
    spec = tiny_spec(sweeps=(("robots", (1, 2)),))
    results = run_experiment_grid(spec)
    assert [r.point.robots for r in results] == [1, 2]

    csv_path = tmp_path / "results.csv"
    write_results_csv(csv_path, results)
    rows = list(csv.reader(csv_path.read_text().splitlines()))
    assert tuple(rows[0]) == RESULT_COLUMNS
    assert [row[1] for row in rows[1:]] == ["oracle", "oracle"]

    json_path = tmp_path / "results.json"
    write_results_json(json_path, spec, results)
    payload = json.loads(json_path.read_text())
    assert payload["message_bits"] == {"oracle": 64, "mm-vin": None}
    assert payload["compression_ratio"] is None
    assert len(payload["points"]) == 2


def test_grid_preconditions() -> None:
    with pytest.raises(ConfigurationError):
        run_experiment_grid(tiny_spec(trials=0))
    with pytest.raises(ConfigurationError):
        run_experiment_grid(tiny_spec(methods=(Method.LEARNED,)))


def test_parse_checkpoint_map() -> None:
    assert parse_checkpoint_map("16=var/mm16, 32=var/mm32") == {16: Path("var/mm16"), 32: Path("var/mm32")}
    assert parse_checkpoint_map("") == {}
    for text in ("16", "16=", "big=var/mm"):
        with pytest.raises(ConfigurationError):
            parse_checkpoint_map(text)


@pytest.fixture
def checkpoints(tmp_path) -> dict[str, Path]:
    rng = np.random.default_rng(0)
    dirs = {}
    for h in (4, 8):
        arch = MMArchitecture(width=8, height=8, embedding_size=h, conv_channels=(2, 3))
        dirs[f"mm{h}"] = tmp_path / f"H{h}"
        MemoryNetwork.initialize(arch, rng).save(dirs[f"mm{h}"])
    dirs["vin"] = tmp_path / "vin"
    ValueIterationNetwork.handset(4).save(dirs["vin"])
    return dirs


def test_embedding_size_sweep_uses_one_checkpoint_per_point(checkpoints: dict[str, Path]) -> None:
    spec = tiny_spec(
        base=ExperimentPoint(robots=1, half_width=2),
        sweeps=(("embedding_size", (4, 8)),),
        trials=1,
        methods=(Method.LEARNED, Method.ORACLE),
    )
    assert spec.methods_for(spec.points()[0]) == (Method.LEARNED,)
    results = run_experiment_grid(
        spec, vin_dir=checkpoints["vin"], mm_by_size={4: checkpoints["mm4"], 8: checkpoints["mm8"]}
    )
    assert [(r.method, r.point.embedding_size) for r in results] == [(Method.LEARNED, 4), (Method.LEARNED, 8)]
    assert [r.message_bits for r in results] == [4 * 32, 8 * 32]
    assert [r.point.label.split(",")[-1] for r in results] == ["embedding_size=4", "embedding_size=8"]


def test_embedding_size_sweep_checks_its_checkpoints(checkpoints: dict[str, Path]) -> None:
    spec = tiny_spec(sweeps=(("embedding_size", (4,)),), trials=1, methods=(Method.LEARNED,))
    with pytest.raises(ConfigurationError):
        run_experiment_grid(spec, vin_dir=checkpoints["vin"], mm_by_size={8: checkpoints["mm8"]})
    with pytest.raises(ConfigurationError):
        run_experiment_grid(spec, vin_dir=checkpoints["vin"], mm_by_size={4: checkpoints["mm8"]})


def test_vin_runs_with_iterations_for_the_evaluated_maps(checkpoints: dict[str, Path]) -> None:
    spec = tiny_spec(width=8, height=8)
    assert spec.k_iterations == 16
    _, planner = load_models(checkpoints["mm4"], checkpoints["vin"], spec.k_iterations)
    assert planner.network.arch.k_iterations == 16
    _, stored = load_models(checkpoints["mm4"], checkpoints["vin"])
    assert stored.network.arch.k_iterations == 4
