"""Average Step Accuracy and Success weighted by Path Length."""

from collections import defaultdict
from collections.abc import Sequence

import numpy as np

from core.exceptions import DomainError
from gridworld.types import CellPos, OccupancyGrid
from gridworld.world import apply_action

from .types import EpisodeResult, LegResult, RobotResult


def asa(results: Sequence[EpisodeResult]) -> float:
    """Percent of executed time-steps whose action was optimal on the true grid."""
    if not results:
        raise DomainError("ASA needs at least one episode")
    total = sum(r.total_steps for r in results)
    if total == 0:
        raise DomainError("ASA is undefined when no steps were taken")
    correct = sum(robot.correct_steps for r in results for robot in r.robots)
    return 100.0 * correct / total


def path_term(success: bool, optimal_length: int, steps: int) -> float:
    """``S · L / max(P, L)``; a zero-length path taken in zero steps counts as ratio 1."""
    if not success:
        return 0.0
    longest = max(steps, optimal_length)
    return 1.0 if longest == 0 else optimal_length / longest


def spl_of_legs(legs: Sequence[LegResult]) -> float:
    if not legs:
        raise DomainError("SPL needs at least one path")
    return float(np.mean([path_term(leg.success, leg.optimal_length, leg.steps) for leg in legs]))


def spl(results: Sequence[EpisodeResult]) -> float:
    """SPL over all robot-goal traversals of all episodes."""
    return spl_of_legs([leg for r in results for leg in r.legs])


def spl_by_robot(results: Sequence[EpisodeResult]) -> float:
    """SPL with one path per robot: whole goal chain, ``L_i`` summed over legs."""
    robots = [robot for r in results for robot in r.robots]
    if not robots:
        raise DomainError("SPL needs at least one path")
    return float(np.mean([path_term(rb.success, rb.optimal_length, rb.steps) for rb in robots]))


def spl_by_goal_index(results: Sequence[EpisodeResult]) -> dict[int, float]:
    """SPL per goal index (1-based) over legs with that index."""
    grouped: dict[int, list[LegResult]] = defaultdict(list)
    for result in results:
        for leg in result.legs:
            grouped[leg.goal_index + 1].append(leg)
    return {index: spl_of_legs(legs) for index, legs in sorted(grouped.items())}


def replay_success(
    grid: OccupancyGrid,
    start: CellPos,
    goals: Sequence[CellPos],
    robot: RobotResult,
    cap_multiplier: int = 3,
    lenient_moves: bool = False,
) -> bool:
    """
    Re-derive ``S_i`` from the trajectory alone: no invalid move, every goal
    reached in order and ``P_i <= cap_multiplier · L_i``. In lenient mode an
    illegal move leaves the robot in place instead.
    """
    pos = start
    remaining = list(goals)
    while remaining and remaining[0] == pos:
        remaining.pop(0)
    for step in robot.trajectory:
        if step.pos != pos:
            return False
        nxt = apply_action(grid, pos, step.action)
        if not isinstance(nxt, CellPos):
            if not lenient_moves:
                return False
            continue
        pos = nxt
        while remaining and remaining[0] == pos:
            remaining.pop(0)
    return not remaining and len(robot.trajectory) <= cap_multiplier * robot.optimal_length
