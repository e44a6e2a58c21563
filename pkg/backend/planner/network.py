"""
Value Iteration Network planner.

The input image is ``[belief; goal one-hot]``. A 1×1 reward head produces the
reward image ``r``; starting from ``V = 0`` the network repeats ``K`` times
``Q = conv3×3([r; V])``, ``V = max_a Q`` and then computes one final ``Q``.
The ``A`` Q-values at the robot's cell go through a dense attention layer and
a softmax to give the action distribution.
"""

import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import numpy as np

from autodiff import ops
from autodiff.checkpoint import check_against, load_checkpoint, save_checkpoint
from autodiff.gradcheck import GradCheckReport, gradient_check
from autodiff.params import ParamSet
from autodiff.tensor import Tensor, no_grad
from core.exceptions import CheckpointError, ConfigurationError, DomainError, ShapeError
from gridworld.types import ACTION_DELTAS, NUM_ACTIONS, Action, CellPos

logger = logging.getLogger(__name__)

PREFIX = "vin."


@dataclass(frozen=True)
class VINArchitecture:
    k_iterations: int
    q_channels: int = NUM_ACTIONS
    handcrafted_reward: bool = False

    def __post_init__(self) -> None:
        if self.k_iterations < 1:
            raise ConfigurationError(f"VIN needs K >= 1, got {self.k_iterations}")
        if self.q_channels < 1:
            raise ConfigurationError(f"q-channel count must be >= 1, got {self.q_channels}")

    @classmethod
    def for_grid(cls, width: int, height: int, **kwargs: Any) -> "VINArchitecture":
        """Default ``K = X + Y`` so values can cross any shortest path."""
        return cls(k_iterations=width + height, **kwargs)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class VINOutput:
    q: Tensor
    value: Tensor
    reward: Tensor


def init_params(arch: VINArchitecture, rng: np.random.Generator) -> ParamSet:
    params = ParamSet()
    params.add_conv(f"{PREFIX}reward", 2, 1, 1, rng)
    params.add_conv(f"{PREFIX}transition", 2, arch.q_channels, 3, rng, bias=False)
    params.add_dense(f"{PREFIX}attention", arch.q_channels, NUM_ACTIONS, rng)
    return params


def handset_reward_weights(r_goal: float, r_obstacle: float, discount: float) -> tuple[np.ndarray, np.ndarray]:
    """
    Reward head reproducing the classical reward pattern: ``r_goal`` at the goal
    and an obstacle penalty large enough that entering an obstacle is never
    preferred over any free path.
    """
    goal_value = abs(r_goal) / (1.0 - discount**2)
    obstacle_reward = r_obstacle * (1.0 + 2.0 * goal_value) if r_obstacle < 0 else r_obstacle
    weight = np.array([obstacle_reward, r_goal]).reshape(1, 2, 1, 1)
    return weight, np.zeros(1)


def handset_transition_weights(discount: float, q_channels: int = NUM_ACTIONS) -> np.ndarray:
    """Channel ``a`` reads ``r`` at the cell and ``λ·V`` at the cell action ``a`` leads to."""
    if q_channels < NUM_ACTIONS:
        raise ConfigurationError(f"Hand-set transitions need >= {NUM_ACTIONS} q-channels")
    weight = np.zeros((q_channels, 2, 3, 3))
    for a, (dx, dy) in enumerate(ACTION_DELTAS):
        weight[a, 0, 1, 1] = 1.0
        weight[a, 1, 1 + dy, 1 + dx] = discount
    return weight


def build_input(belief: np.ndarray, goal: CellPos) -> np.ndarray:
    """``[2, Y, X]`` image: belief probabilities and the goal one-hot."""
    height, width = belief.shape
    if not (0 <= goal.x < width and 0 <= goal.y < height):
        raise DomainError(f"Goal {goal} outside the {width}x{height} map", goal=tuple(goal))
    image = np.zeros((2, height, width))
    image[0] = belief
    image[1, goal.y, goal.x] = 1.0
    return image


class ValueIterationNetwork:
    def __init__(self, arch: VINArchitecture, params: ParamSet) -> None:
        self.arch = arch
        self.params = params

    @classmethod
    def initialize(cls, arch: VINArchitecture, rng: np.random.Generator) -> "ValueIterationNetwork":
        network = cls(arch, init_params(arch, rng))
        if arch.handcrafted_reward:
            network.set_handcrafted_reward()
        return network

    @classmethod
    def handset(
        cls,
        k_iterations: int,
        r_goal: float = 1.0,
        r_obstacle: float = -1.0,
        discount: float = 0.99,
    ) -> "ValueIterationNetwork":
        """Weights under which the forward pass is exact value iteration with identity attention."""
        arch = VINArchitecture(k_iterations=k_iterations, handcrafted_reward=True)
        network = cls(arch, init_params(arch, np.random.default_rng(0)))
        network.set_handcrafted_reward(r_goal, r_obstacle, discount)
        network.params.assign(f"{PREFIX}transition.weight", handset_transition_weights(discount))
        network.params.assign(f"{PREFIX}attention.weight", np.eye(NUM_ACTIONS))
        network.params.assign(f"{PREFIX}attention.bias", np.zeros(NUM_ACTIONS))
        return network

    def set_handcrafted_reward(self, r_goal: float = 1.0, r_obstacle: float = -1.0, discount: float = 0.99) -> None:
        weight, bias = handset_reward_weights(r_goal, r_obstacle, discount)
        self.params.assign(f"{PREFIX}reward.weight", weight)
        self.params.assign(f"{PREFIX}reward.bias", bias)

    def trainable(self) -> ParamSet:
        """Parameters the optimizer may update; a hand-crafted reward head stays fixed."""
        if not self.arch.handcrafted_reward:
            return self.params
        trainable = ParamSet()
        for prefix in (f"{PREFIX}transition", f"{PREFIX}attention"):
            trainable = trainable.merged(self.params.with_prefix(prefix))
        return trainable

    def forward(self, inputs: Tensor) -> VINOutput:
        """``[B, 2, Y, X]`` inputs → Q-values ``[B, q, Y, X]``."""
        if inputs.ndim != 4 or inputs.shape[1] != 2:
            raise ShapeError("VIN input", expected=(-1, 2, -1, -1), actual=inputs.shape)
        p = self.params
        reward = ops.conv2d(inputs, p[f"{PREFIX}reward.weight"], p[f"{PREFIX}reward.bias"])
        transition = p[f"{PREFIX}transition.weight"]
        value = Tensor(np.zeros(reward.shape))
        for _ in range(self.arch.k_iterations):
            q = ops.conv2d(ops.concat([reward, value], axis=1), transition)
            value, _ = ops.channel_max(q, keepdims=True)
        q = ops.conv2d(ops.concat([reward, value], axis=1), transition)
        return VINOutput(q=q, value=value, reward=reward)

    def logits_at(self, q: Tensor, batch: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> Tensor:
        cells = ops.gather_cells(q, batch, ys, xs)
        return ops.dense(cells, self.params[f"{PREFIX}attention.weight"], self.params[f"{PREFIX}attention.bias"])

    def q_values(self, belief: np.ndarray, goal: CellPos) -> np.ndarray:
        """``[q, Y, X]`` Q-values for one belief map."""
        with no_grad():
            return self.forward(Tensor(build_input(belief, goal)[None])).q.data[0]

    def select_action(self, q: np.ndarray, pos: CellPos) -> tuple[np.ndarray, Action]:
        """Action distribution at ``pos`` and its argmax (lowest index on ties)."""
        height, width = q.shape[1:]
        if not (0 <= pos.x < width and 0 <= pos.y < height):
            raise DomainError(f"Position {pos} outside the map", pos=tuple(pos))
        weight = self.params[f"{PREFIX}attention.weight"].data
        bias = self.params[f"{PREFIX}attention.bias"].data
        logits = weight @ q[:, pos.y, pos.x] + bias
        return ops.softmax_array(logits), Action(int(np.argmax(logits)))

    def plan(self, belief: np.ndarray, pos: CellPos, goal: CellPos) -> tuple[np.ndarray, Action]:
        return self.select_action(self.q_values(belief, goal), pos)

    def render_confidence(self, belief: np.ndarray, goal: CellPos) -> np.ndarray:
        """Per-cell maximum softmax probability, in ``[1/A, 1]``."""
        q = self.q_values(belief, goal)
        weight = self.params[f"{PREFIX}attention.weight"].data
        bias = self.params[f"{PREFIX}attention.bias"].data
        logits = np.einsum("aq,qyx->yxa", weight, q) + bias
        return ops.softmax_array(logits, axis=-1).max(axis=-1)

    def save(self, directory: Path, extra: dict[str, Any] | None = None) -> None:
        metadata = {"module": "vin", "architecture": self.arch.to_dict(), **(extra or {})}
        save_checkpoint(self.params, directory, metadata)

    @classmethod
    def load(cls, directory: Path, k_iterations: int | None = None) -> "ValueIterationNetwork":
        """Load a checkpoint; ``k_iterations`` overrides the stored K (e.g. for larger maps)."""
        params, metadata = load_checkpoint(directory)
        if metadata.get("module") != "vin":
            raise CheckpointError("Not a VIN checkpoint", directory)
        stored = VINArchitecture(**metadata["architecture"])
        arch = stored if k_iterations is None else VINArchitecture(
            k_iterations, stored.q_channels, stored.handcrafted_reward
        )
        check_against(params, init_params(arch, np.random.default_rng(0)), directory)
        logger.info(f"Loaded VIN K={arch.k_iterations} q={arch.q_channels} from {directory}")
        return cls(arch, params)


def stack_gradient_check(rng: np.random.Generator, tolerance: float | None = None) -> GradCheckReport:
    """Finite-difference check of reward head → K iterations → attention → cross-entropy."""
    network = ValueIterationNetwork.initialize(VINArchitecture(k_iterations=3), rng)
    for tensor in network.params.values():
        tensor.data = (tensor.data + rng.normal(0.0, 0.1, tensor.shape)).astype(tensor.data.dtype)
    beliefs = rng.random((2, 5, 5))
    images = np.stack([build_input(b, CellPos(int(g), 4 - int(g))) for b, g in zip(beliefs, (1, 3), strict=True)])
    batch = np.array([0, 0, 1, 1])
    ys, xs = np.array([0, 2, 4, 1]), np.array([3, 0, 2, 4])
    labels = rng.integers(0, NUM_ACTIONS, size=4)

    def loss() -> Tensor:
        q = network.forward(Tensor(images)).q
        return ops.cross_entropy_loss(network.logits_at(q, batch, ys, xs), labels)

    return gradient_check(loss, network.params, "vin-stack", tolerance, rng=rng)
