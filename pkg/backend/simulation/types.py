"""Robot state and episode results of the decentralized simulation."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from core.exceptions import ConfigurationError
from gridworld.types import Action, CellPos


class RobotStatus(str, Enum):
    ACTIVE = "active"
    SUCCEEDED = "succeeded"
    FAILED = "failed"


class FailureReason(str, Enum):
    INVALID_MOVE = "invalid-move"
    TIMEOUT = "timeout"


class Method(str, Enum):
    LEARNED = "mm-vin"
    ORACLE = "oracle"


@dataclass(frozen=True)
class SimulationOptions:
    cap_multiplier: int = 3
    lenient_moves: bool = False
    final_broadcast_steps: int = 1
    detect_cycles: bool = False
    record_beliefs: bool = False

    def __post_init__(self) -> None:
        if self.cap_multiplier < 1:
            raise ConfigurationError(f"Step cap multiplier must be >= 1, got {self.cap_multiplier}")
        if self.final_broadcast_steps < 0:
            raise ConfigurationError("Final broadcast steps must be >= 0")


@dataclass(frozen=True)
class TrajectoryStep:
    step: int
    pos: CellPos
    goal_index: int
    action: Action
    optimal_mask: int

    @property
    def correct(self) -> bool:
        return bool(self.optimal_mask >> int(self.action) & 1)


@dataclass(frozen=True)
class LegResult:
    """One robot-goal traversal; SPL counts each leg as one path."""

    robot: int
    goal_index: int
    goal: CellPos
    optimal_length: int
    steps: int
    success: bool


@dataclass
class RobotState:
    robot_id: int
    pos: CellPos
    goals: tuple[CellPos, ...]
    embedding: np.ndarray
    leg_lengths: tuple[int, ...]
    step_cap: int
    goal_index: int = 0
    status: RobotStatus = RobotStatus.ACTIVE
    failure: FailureReason | None = None
    steps: int = 0
    leg_steps: int = 0
    finished_step: int | None = None
    trajectory: list[TrajectoryStep] = field(default_factory=list)
    legs: list[LegResult] = field(default_factory=list)
    belief: np.ndarray | None = None
    # (pos, embedding digest, goal index) -> update, filled only for message-free noiseless steps.
    cached_updates: dict[tuple[Any, ...], Any] = field(default_factory=dict)

    @property
    def active(self) -> bool:
        return self.status is RobotStatus.ACTIVE

    @property
    def current_goal(self) -> CellPos:
        return self.goals[self.goal_index]

    @property
    def optimal_length(self) -> int:
        return sum(self.leg_lengths)

    def complete_leg(self) -> None:
        self.legs.append(
            LegResult(
                self.robot_id, self.goal_index, self.current_goal,
                self.leg_lengths[self.goal_index], self.leg_steps, True,
            )
        )
        self.goal_index += 1
        self.leg_steps = 0

    def fail(self, reason: FailureReason, step: int) -> None:
        self.status = RobotStatus.FAILED
        self.failure = reason
        self.finished_step = step
        for index in range(self.goal_index, len(self.goals)):
            self.legs.append(
                LegResult(
                    self.robot_id, index, self.goals[index], self.leg_lengths[index],
                    self.leg_steps if index == self.goal_index else 0, False,
                )
            )

    def to_result(self) -> "RobotResult":
        return RobotResult(
            robot_id=self.robot_id,
            success=self.status is RobotStatus.SUCCEEDED,
            steps=self.steps,
            optimal_length=self.optimal_length,
            failure=self.failure,
            legs=tuple(self.legs),
            trajectory=tuple(self.trajectory),
        )


@dataclass(frozen=True)
class RobotResult:
    robot_id: int
    success: bool
    steps: int
    optimal_length: int
    failure: FailureReason | None
    legs: tuple[LegResult, ...]
    trajectory: tuple[TrajectoryStep, ...]

    @property
    def correct_steps(self) -> int:
        return sum(1 for s in self.trajectory if s.correct)


@dataclass(frozen=True)
class EpisodeResult:
    method: Method
    robots: tuple[RobotResult, ...]
    config: dict[str, Any] = field(default_factory=dict)

    @property
    def total_steps(self) -> int:
        return sum(len(r.trajectory) for r in self.robots)

    @property
    def legs(self) -> list[LegResult]:
        return [leg for robot in self.robots for leg in robot.legs]
