"""
The decentralized step loop.

At every step each active robot, in ascending id order: observes its window
of the true grid, encodes it and folds it into its previous embedding, folds
in the previous-step embeddings of its neighbours (ascending sender id),
decodes the result into a belief, plans on the belief and acts. All messages
are snapshotted before any robot updates. ``robot_update`` never sees the
true grid; only ``observe``, ``apply_action`` and the ``Judge`` do.

With ``detect_cycles`` a robot that revisits a (position, embedding, goal
index) state with no incoming messages and no sensor noise reuses the update
it computed the first time instead of running the networks again. Memory and
planner are deterministic functions of their inputs, so trajectories and
outcomes are those of a run without the detector.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from core.exceptions import ConfigurationError
from expert.bfs import DistanceField, action_mask, bfs_field, optimal_actions
from gridworld.types import CellPos, EpisodeConfig, MoveFailure, Observation, OccupancyGrid
from gridworld.world import apply_action, comm_graph, neighbors_of, observe
from memory.exact import ExactMemory
from memory.types import AggregatorKind, MemoryModel
from planner.policies import BFSPlanner, Decision, Planner

from .transcript import Record, digest, episode_record, pack_belief
from .types import (
    EpisodeResult,
    FailureReason,
    Method,
    RobotState,
    RobotStatus,
    SimulationOptions,
    TrajectoryStep,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RobotUpdate:
    embedding: np.ndarray
    belief: np.ndarray
    decision: Decision


def robot_update(
    memory: MemoryModel,
    planner: Planner,
    previous: np.ndarray,
    observation: Observation,
    messages: Sequence[tuple[int, np.ndarray]],
    pos: CellPos,
    goal: CellPos,
) -> RobotUpdate:
    """One robot's belief update and decision from its own inputs only."""
    embedding = memory.aggregate(previous, memory.encode(observation.grid), AggregatorKind.OBSERVATION)
    for _, message in sorted(messages, key=lambda item: item[0]):
        embedding = memory.aggregate(embedding, message, AggregatorKind.MESSAGE)
    belief = memory.decode(embedding)
    return RobotUpdate(embedding, belief, planner.decide(belief, pos, goal))


class Judge:
    """Ground-truth bookkeeping: optimal actions and shortest path lengths on the true grid."""

    def __init__(self, grid: OccupancyGrid) -> None:
        self.grid = grid
        self._fields: dict[CellPos, DistanceField] = {}

    def field(self, goal: CellPos) -> DistanceField:
        if goal not in self._fields:
            self._fields[goal] = bfs_field(self.grid, goal)
        return self._fields[goal]

    def optimal_mask(self, pos: CellPos, goal: CellPos) -> int:
        if pos == goal:
            return 0
        return action_mask(optimal_actions(self.field(goal), pos))

    def leg_lengths(self, start: CellPos, goals: Sequence[CellPos]) -> tuple[int, ...]:
        lengths = []
        pos = start
        for goal in goals:
            field = self.field(goal)
            if not field.is_reachable(pos):
                raise ConfigurationError(f"Goal {goal} unreachable from {pos}")
            lengths.append(field.at(pos))
            pos = goal
        return tuple(lengths)


def _broadcasting(robot: RobotState, t: int, options: SimulationOptions) -> bool:
    if robot.active:
        return True
    return (
        robot.status is RobotStatus.SUCCEEDED
        and robot.finished_step is not None
        and t - robot.finished_step <= options.final_broadcast_steps
    )


def step(
    world: OccupancyGrid,
    robots: Sequence[RobotState],
    memory: MemoryModel,
    planner: Planner,
    cfg: EpisodeConfig,
    rng: np.random.Generator,
    t: int,
    judge: Judge,
    options: SimulationOptions = SimulationOptions(),
) -> list[Record]:
    """Advance every active robot by one time-step; returns the step's transcript records."""
    edges = comm_graph([r.pos for r in robots], cfg.comm_range)
    snapshot = {r.robot_id: r.embedding.copy() for r in robots if _broadcasting(r, t, options)}
    edge_list = sorted([list(edge) for edge in edges])
    records: list[Record] = []

    for robot in robots:
        if not robot.active:
            continue
        observation = observe(world, robot.pos, cfg.half_width, cfg.noise, rng)
        messages = [(j, snapshot[j]) for j in neighbors_of(edges, robot.robot_id) if j in snapshot]
        previous = robot.embedding
        key = None
        if options.detect_cycles and not messages and cfg.noise == 0.0:
            key = (robot.pos, digest(previous), robot.goal_index)
        update = robot.cached_updates.get(key) if key is not None else None
        if update is None:
            update = robot_update(memory, planner, previous, observation, messages, robot.pos, robot.current_goal)
            if key is not None:
                robot.cached_updates[key] = update
        action = update.decision.action
        mask = judge.optimal_mask(robot.pos, robot.current_goal)
        robot.trajectory.append(TrajectoryStep(t, robot.pos, robot.goal_index, action, mask))
        robot.embedding = update.embedding
        robot.belief = update.belief
        robot.steps += 1
        robot.leg_steps += 1

        record: Record = {
            "type": "step",
            "t": t,
            "robot": robot.robot_id,
            "pos": list(robot.pos),
            "goal_index": robot.goal_index,
            "goal": list(robot.current_goal),
            "action": int(action),
            "optimal_mask": mask,
            "edges": edge_list,
            "messages": [{"from": j, "sha": digest(m)} for j, m in messages],
            "embedding_in_sha": digest(previous),
            "embedding_out_sha": digest(update.embedding),
        }
        if options.record_beliefs:
            record["belief"] = pack_belief(update.belief)

        outcome = apply_action(world, robot.pos, action)
        if isinstance(outcome, MoveFailure):
            record["outcome"] = outcome.value
            if not options.lenient_moves:
                robot.fail(FailureReason.INVALID_MOVE, t)
        else:
            record["outcome"] = "moved"
            robot.pos = outcome
            while robot.active and robot.pos == robot.current_goal:
                robot.complete_leg()
                if robot.goal_index == len(robot.goals):
                    robot.status = RobotStatus.SUCCEEDED
                    robot.finished_step = t
        if robot.active and robot.steps >= robot.step_cap:
            robot.fail(FailureReason.TIMEOUT, t)
        record["next_pos"] = list(robot.pos)
        record["status"] = robot.status.value
        records.append(record)
    return records


def _leg_records(robot: RobotState, already: int) -> list[Record]:
    return [
        {
            "type": "leg",
            "robot": leg.robot,
            "goal_index": leg.goal_index,
            "optimal_length": leg.optimal_length,
            "steps": leg.steps,
            "success": leg.success,
        }
        for leg in robot.legs[already:]
    ]


def run_episode(
    cfg: EpisodeConfig,
    memory: MemoryModel,
    planner: Planner,
    options: SimulationOptions = SimulationOptions(),
    method: Method = Method.LEARNED,
    transcript: list[Record] | None = None,
    episode_index: int = 0,
) -> EpisodeResult:
    """
    Step until every robot has succeeded or failed. Each robot is capped at
    ``cap_multiplier · L_i`` steps, ``L_i`` being the sum of its legs' shortest paths.
    """
    judge = Judge(cfg.grid)
    rng = np.random.default_rng(cfg.rng_seed)
    initial = memory.empty_embedding()
    robots = []
    for i, (start, goals) in enumerate(zip(cfg.starts, cfg.goal_lists, strict=True)):
        lengths = judge.leg_lengths(start, goals)
        robot = RobotState(
            robot_id=i,
            pos=start,
            goals=goals,
            embedding=initial.copy(),
            leg_lengths=lengths,
            step_cap=options.cap_multiplier * sum(lengths),
        )
        while robot.active and robot.pos == robot.current_goal:
            robot.complete_leg()
            if robot.goal_index == len(robot.goals):
                robot.status = RobotStatus.SUCCEEDED
                robot.finished_step = -1
        robots.append(robot)

    records: list[Record] = [
        episode_record(
            cfg, method.value, [r.leg_lengths for r in robots], options.cap_multiplier,
            memory.message_bits, episode_index,
        )
    ]
    records.extend({"type": "init", "robot": r.robot_id, "embedding_sha": digest(r.embedding)} for r in robots)
    legs_written = {r.robot_id: 0 for r in robots}

    t = 0
    while any(r.active for r in robots):
        records.extend(step(cfg.grid, robots, memory, planner, cfg, rng, t, judge, options))
        for robot in robots:
            records.extend(_leg_records(robot, legs_written[robot.robot_id]))
            legs_written[robot.robot_id] = len(robot.legs)
        t += 1
    for robot in robots:
        records.extend(_leg_records(robot, legs_written[robot.robot_id]))
        records.append(
            {
                "type": "result",
                "robot": robot.robot_id,
                "success": robot.status is RobotStatus.SUCCEEDED,
                "steps": robot.steps,
                "optimal_length": robot.optimal_length,
                "failure": robot.failure.value if robot.failure else None,
            }
        )

    if transcript is not None:
        transcript.extend(records)
    config_echo = {
        "robots": cfg.num_robots,
        "goals": len(cfg.goal_lists[0]),
        "half_width": cfg.half_width,
        "comm_range": cfg.comm_range,
        "noise": cfg.noise,
        "seed": cfg.rng_seed,
        "width": cfg.grid.width,
        "height": cfg.grid.height,
        "message_bits": memory.message_bits,
    }
    logger.debug(f"Episode {episode_index} ({method.value}) finished after {t} steps")
    return EpisodeResult(method, tuple(r.to_result() for r in robots), config_echo)


def run_oracle_baseline(
    cfg: EpisodeConfig,
    options: SimulationOptions = SimulationOptions(),
    transcript: list[Record] | None = None,
    episode_index: int = 0,
) -> EpisodeResult:
    """Same loop with exact bitmap beliefs merged by OR and BFS replanning on the belief."""
    memory = ExactMemory(cfg.grid.width, cfg.grid.height)
    return run_episode(cfg, memory, BFSPlanner(), options, Method.ORACLE, transcript, episode_index)
