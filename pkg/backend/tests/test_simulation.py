import numpy as np
import pytest

from autodiff.tensor import precision
from core.exceptions import DomainError, TranscriptError
from gridworld.types import Action, CellPos, EpisodeConfig, Observation, OccupancyGrid
from memory.exact import ExactMemory
from memory.types import AggregatorKind
from planner.network import ValueIterationNetwork
from planner.policies import BFSPlanner, VINPlanner
from simulation.engine import robot_update, run_episode, run_oracle_baseline
from simulation.metrics import asa, path_term, replay_success, spl, spl_by_goal_index, spl_by_robot
from simulation.transcript import (
    TranscriptWriter,
    audit_causality,
    episode_grid,
    metrics_from_transcript,
    pack_belief,
    read_transcript,
    split_episodes,
    unpack_belief,
)
from simulation.types import (
    EpisodeResult,
    FailureReason,
    LegResult,
    Method,
    RobotResult,
    SimulationOptions,
    TrajectoryStep,
)


def two_robot_config(grid: OccupancyGrid, **kwargs) -> EpisodeConfig:
    return EpisodeConfig(grid, ((0, 0), (0, 5)), (((5, 5),), ((5, 0),)), **kwargs)


def test_start_on_goal_scores_one(open_grid: OccupancyGrid) -> None:
    cfg = EpisodeConfig(open_grid, ((2, 2),), (((2, 2),),))
    transcript: list = []
    result = run_oracle_baseline(cfg, transcript=transcript)
    robot = result.robots[0]
    assert robot.success
    assert robot.steps == 0
    assert path_term(robot.success, robot.optimal_length, robot.steps) == 1.0
    assert spl([result]) == 1.0
    assert not [r for r in transcript if r["type"] == "step"]
    with pytest.raises(DomainError):
        asa([result])


def test_invalid_move_fails_immediately(wall_grid: OccupancyGrid, scripted_planner) -> None:
    cfg = EpisodeConfig(wall_grid, ((1, 0),), (((5, 0),),))
    result = run_episode(cfg, ExactMemory(6, 6), scripted_planner([Action.E]))
    robot = result.robots[0]
    assert not robot.success
    assert robot.failure is FailureReason.INVALID_MOVE
    assert robot.steps == 1
    assert robot.legs == (LegResult(0, 0, CellPos(5, 0), 8, 1, False),)
    assert not replay_success(wall_grid, CellPos(1, 0), [CellPos(5, 0)], robot)


def test_lenient_moves_stay_in_place_until_timeout(wall_grid: OccupancyGrid, scripted_planner) -> None:
    cfg = EpisodeConfig(wall_grid, ((1, 0),), (((5, 0),),))
    options = SimulationOptions(lenient_moves=True)
    result = run_episode(cfg, ExactMemory(6, 6), scripted_planner([Action.E]), options)
    robot = result.robots[0]
    assert robot.failure is FailureReason.TIMEOUT
    assert robot.steps == 3 * 8
    assert {step.pos for step in robot.trajectory} == {CellPos(1, 0)}


def test_oscillation_times_out_at_the_cap(open_grid: OccupancyGrid, scripted_planner) -> None:
    cfg = EpisodeConfig(open_grid, ((0, 0),), (((4, 0),),))
    result = run_episode(cfg, ExactMemory(6, 6), scripted_planner([Action.E, Action.W]))
    robot = result.robots[0]
    assert robot.failure is FailureReason.TIMEOUT
    assert robot.steps == 12
    assert spl([result]) == 0.0


def test_cycle_detection_skips_networks_without_changing_outcomes(open_grid: OccupancyGrid, scripted_planner) -> None:
    cfg = EpisodeConfig(open_grid, ((0, 0),), (((4, 0),),))
    plain_planner = scripted_planner([Action.E, Action.W])
    plain = run_episode(cfg, ExactMemory(6, 6), plain_planner)
    detecting_planner = scripted_planner([Action.E, Action.W])
    detecting = run_episode(cfg, ExactMemory(6, 6), detecting_planner, SimulationOptions(detect_cycles=True))

    robot = detecting.robots[0]
    assert robot.failure is FailureReason.TIMEOUT
    assert robot.steps == plain.robots[0].steps == 12
    assert robot.trajectory == plain.robots[0].trajectory
    assert asa([detecting]) == asa([plain])
    assert plain_planner.calls == 12
    assert detecting_planner.calls <= 4


def test_cycle_detection_still_listens_to_neighbours(open_grid: OccupancyGrid, scripted_planner) -> None:
    cfg = EpisodeConfig(open_grid, ((0, 0), (0, 2)), (((4, 0),), ((4, 2),)), comm_range=4)
    planner = scripted_planner([Action.E, Action.E, Action.W, Action.W])
    result = run_episode(cfg, ExactMemory(6, 6), planner, SimulationOptions(detect_cycles=True))
    assert [r.steps for r in result.robots] == [12, 12]
    assert planner.calls == 24


def test_oracle_is_optimal_under_full_observability(wall_grid: OccupancyGrid) -> None:
    cfg = EpisodeConfig(wall_grid, ((0, 0), (0, 5)), (((5, 0),), ((5, 5),)), half_width=6)
    result = run_oracle_baseline(cfg)
    assert spl([result]) == 1.0
    assert asa([result]) == 100.0
    for start, goals, robot in zip(cfg.starts, cfg.goal_lists, result.robots, strict=True):
        assert replay_success(wall_grid, start, goals, robot)


def test_exact_memory_with_vin_matches_planning_on_the_true_map(wall_grid: OccupancyGrid) -> None:
    cfg = EpisodeConfig(wall_grid, ((0, 0),), (((5, 0),),), half_width=6)
    truth = wall_grid.cells.astype(np.float64)
    with precision("float64"):
        network = ValueIterationNetwork.handset(20)
        result = run_episode(cfg, ExactMemory(6, 6), VINPlanner(network))
        robot = result.robots[0]
        assert robot.success
        assert robot.steps == robot.optimal_length
        for step in robot.trajectory:
            assert step.action is network.plan(truth, step.pos, CellPos(5, 0))[1]


def test_multi_goal_chains_are_scored_per_leg(open_grid: OccupancyGrid) -> None:
    cfg = EpisodeConfig(open_grid, ((0, 0),), (((3, 0), (3, 3), (0, 3)),))
    result = run_oracle_baseline(cfg)
    robot = result.robots[0]
    assert robot.success
    assert [leg.optimal_length for leg in robot.legs] == [3, 3, 3]
    assert spl_by_goal_index([result]) == {1: 1.0, 2: 1.0, 3: 1.0}
    assert spl_by_robot([result]) == 1.0


def test_messages_fold_in_sender_order() -> None:
    calls = []

    class RecordingMemory(ExactMemory):
        def aggregate(self, first, second, which):
            calls.append((which, int(second.sum())))
            return super().aggregate(first, second, which)

    memory = RecordingMemory(4, 4)
    observed = np.zeros((4, 4))
    observed[0, 0] = 1
    from_one = np.zeros(16)
    from_one[5] = 1
    from_three = np.zeros(16)
    from_three[[6, 7, 8]] = 1
    update = robot_update(
        memory,
        BFSPlanner(),
        memory.empty_embedding(),
        Observation(observed, CellPos(0, 0), 1),
        [(3, from_three), (1, from_one)],
        CellPos(0, 0),
        CellPos(3, 3),
    )
    assert calls == [(AggregatorKind.OBSERVATION, 1), (AggregatorKind.MESSAGE, 1), (AggregatorKind.MESSAGE, 3)]
    assert update.belief.sum() == 5


def test_succeeded_robot_broadcasts_once(open_grid: OccupancyGrid) -> None:
    cfg = EpisodeConfig(open_grid, ((0, 0), (0, 5)), (((0, 0),), ((5, 5),)), comm_range=20)
    transcript: list = []
    run_oracle_baseline(cfg, transcript=transcript)
    steps = {r["t"]: r for r in transcript if r["type"] == "step" and r["robot"] == 1}
    assert [m["from"] for m in steps[0]["messages"]] == [0]
    assert steps[1]["messages"] == []


def test_causality_audit(open_grid: OccupancyGrid) -> None:
    transcript: list = []
    run_oracle_baseline(two_robot_config(open_grid, comm_range=12, half_width=1), transcript=transcript)
    report = audit_causality(transcript)
    assert report.passed, report.violations
    assert report.messages > 0

    tampered = [dict(r) for r in transcript]
    for record in tampered:
        if record["type"] == "step" and record["t"] == 2 and record["messages"]:
            record["messages"] = [{"from": m["from"], "sha": "0" * 64} for m in record["messages"]]
            break
    assert not audit_causality(tampered).passed


def test_transcript_metrics_match(open_grid: OccupancyGrid, wall_grid: OccupancyGrid, scripted_planner) -> None:
    transcript: list = []
    results = [
        run_oracle_baseline(two_robot_config(open_grid, half_width=1), transcript=transcript),
        run_episode(
            EpisodeConfig(wall_grid, ((0, 0),), (((5, 0),),)),
            ExactMemory(6, 6),
            scripted_planner([Action.S, Action.SE, Action.N]),
            SimulationOptions(lenient_moves=True),
            transcript=transcript,
            episode_index=1,
        ),
    ]
    transcript_asa, transcript_spl = metrics_from_transcript(transcript)
    assert transcript_asa == pytest.approx(asa(results))
    assert transcript_spl == pytest.approx(spl(results))
    assert len(split_episodes(transcript)) == 2


def test_transcript_file_round_trip(tmp_path, wall_grid: OccupancyGrid) -> None:
    transcript: list = []
    options = SimulationOptions(record_beliefs=True)
    run_oracle_baseline(EpisodeConfig(wall_grid, ((0, 0),), (((5, 0),),), half_width=6), options, transcript)
    path = tmp_path / "episode.jsonl"
    with path.open("w") as stream:
        TranscriptWriter(stream).write_all(transcript)

    records = list(read_transcript(path))
    assert records == transcript
    header = records[0]
    assert episode_grid(header).equals(wall_grid)
    step = next(r for r in records if r["type"] == "step")
    assert np.array_equal(unpack_belief(step["belief"], 6, 6), wall_grid.cells)


def test_malformed_transcript(tmp_path) -> None:
    path = tmp_path / "bad.jsonl"
    path.write_text('{"type": "episode"}\n{not json\n')
    with pytest.raises(TranscriptError) as excinfo:
        list(read_transcript(path))
    assert excinfo.value.line == 2
    with pytest.raises(TranscriptError):
        split_episodes([{"type": "step"}])


def test_belief_packing_thresholds() -> None:
    belief = np.array([[0.2, 0.5, 0.9, 0.0]] * 4)
    assert unpack_belief(pack_belief(belief), 4, 4)[0].tolist() == [0, 1, 1, 0]
    assert pack_belief(belief) == pack_belief(belief.copy())


def test_noisy_episodes_are_reproducible(open_grid: OccupancyGrid) -> None:
    cfg = two_robot_config(open_grid, noise=0.2, rng_seed=9, half_width=2)
    first: list = []
    second: list = []
    run_oracle_baseline(cfg, transcript=first)
    run_oracle_baseline(cfg, transcript=second)
    assert first == second


def fixture_result() -> EpisodeResult:
    goal = CellPos(0, 0)
    steps = (
        TrajectoryStep(0, goal, 0, Action.N, 0b00000001),
        TrajectoryStep(1, goal, 0, Action.E, 0b00000100),
        TrajectoryStep(2, goal, 1, Action.S, 0b00000001),
    )
    winner = RobotResult(
        0, True, 12, 8, None,
        (LegResult(0, 0, goal, 4, 4, True), LegResult(0, 1, goal, 4, 8, True)),
        steps,
    )
    loser = RobotResult(
        1, False, 5, 5, FailureReason.TIMEOUT,
        (LegResult(1, 0, goal, 5, 5, False), LegResult(1, 1, goal, 0, 0, True)),
        (),
    )
    return EpisodeResult(Method.ORACLE, (winner, loser))


def test_metric_fixtures() -> None:
    results = [fixture_result()]
    assert asa(results) == pytest.approx(200.0 / 3)
    assert spl(results) == pytest.approx((1.0 + 0.5 + 0.0 + 1.0) / 4)
    assert spl_by_robot(results) == pytest.approx((8 / 12 + 0.0) / 2)
    assert spl_by_goal_index(results) == pytest.approx({1: 0.5, 2: 0.75})


def test_path_term_edges() -> None:
    assert path_term(False, 4, 4) == 0.0
    assert path_term(True, 0, 0) == 1.0
    assert path_term(True, 4, 2) == 1.0
    assert path_term(True, 4, 10) == 0.4
