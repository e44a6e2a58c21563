"""
Imitation training of the VIN from BFS-expert labels.

Targets are the canonical (lowest-index) optimal action; evaluation counts a
prediction as correct when it is any optimal action.
"""

import logging
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from autodiff import ops
from autodiff.optim import Optimizer, OptimizerConfig, build_optimizer
from autodiff.params import ParamSet
from autodiff.tensor import Tensor, no_grad
from core.exceptions import ConfigurationError, DomainError, TrainingDivergedError
from gridworld.container import LabeledSample
from gridworld.types import NUM_ACTIONS
from memory.network import MemoryNetwork

from .network import ValueIterationNetwork, VINArchitecture

logger = logging.getLogger(__name__)

EVAL_BATCH = 64


@dataclass(frozen=True)
class VINTrainingConfig:
    family: str = "simple"
    width: int = 12
    height: int = 12
    k_iterations: int | None = None
    q_channels: int = NUM_ACTIONS
    handcrafted_reward: bool = False
    train_samples: int = 60_000
    test_samples: int = 12_000
    labels_per_map: int = 20
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    end_to_end: bool = False
    mm_checkpoint: Path | None = None
    seed: int = 0
    dataset: Path | None = None
    out: Path = Path("var/models/vin")

    def __post_init__(self) -> None:
        if self.train_samples < 1 or self.test_samples < 1:
            raise ConfigurationError("Need at least one training and one test sample")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("Epochs and batch size must be >= 1")
        if self.end_to_end and self.mm_checkpoint is None:
            raise ConfigurationError("End-to-end fine-tuning needs an MM checkpoint")

    def architecture(self) -> VINArchitecture:
        k = self.k_iterations if self.k_iterations is not None else self.width + self.height
        return VINArchitecture(k, self.q_channels, self.handcrafted_reward)

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(kind=self.optimizer, learning_rate=self.learning_rate)


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """Labeled samples stacked for training: maps ``[N, Y, X]``, goals, positions, labels, masks."""

    maps: np.ndarray
    goals: np.ndarray
    ys: np.ndarray
    xs: np.ndarray
    labels: np.ndarray
    masks: np.ndarray

    def __len__(self) -> int:
        return int(self.maps.shape[0])

    @classmethod
    def from_samples(cls, samples: Sequence[LabeledSample]) -> "SampleBatch":
        if not samples:
            raise DomainError("No labeled samples")
        shapes = {s.grid.shape for s in samples}
        if len(shapes) != 1:
            raise ConfigurationError(f"Labeled samples mix map sizes: {sorted(shapes)}")
        return cls(
            maps=np.stack([s.grid.cells for s in samples]).astype(np.float64),
            goals=np.array([(s.goal.x, s.goal.y) for s in samples], dtype=np.int64),
            ys=np.array([s.pos.y for s in samples], dtype=np.int64),
            xs=np.array([s.pos.x for s in samples], dtype=np.int64),
            labels=np.array([s.canonical_action for s in samples], dtype=np.int64),
            masks=np.array([s.action_mask for s in samples], dtype=np.int64),
        )

    def take(self, index: np.ndarray) -> "SampleBatch":
        return SampleBatch(
            self.maps[index], self.goals[index], self.ys[index], self.xs[index],
            self.labels[index], self.masks[index],
        )

    def goal_images(self) -> np.ndarray:
        images = np.zeros_like(self.maps)
        images[np.arange(len(self)), self.goals[:, 1], self.goals[:, 0]] = 1.0
        return images

    def images(self, beliefs: np.ndarray | None = None) -> np.ndarray:
        """``[N, 2, Y, X]`` VIN inputs; the true map is the belief unless one is given."""
        beliefs = self.maps if beliefs is None else beliefs
        return np.stack([beliefs, self.goal_images()], axis=1)


def logits_for(network: ValueIterationNetwork, batch: SampleBatch, inputs: Tensor) -> Tensor:
    q = network.forward(inputs).q
    return network.logits_at(q, np.arange(len(batch)), batch.ys, batch.xs)


def predict_actions(network: ValueIterationNetwork, batch: SampleBatch) -> np.ndarray:
    predictions = []
    with no_grad():
        for begin in range(0, len(batch), EVAL_BATCH):
            part = batch.take(np.arange(begin, min(begin + EVAL_BATCH, len(batch))))
            predictions.append(np.argmax(logits_for(network, part, Tensor(part.images())).data, axis=1))
    return np.concatenate(predictions)


def evaluate_asa(network: ValueIterationNetwork, batch: SampleBatch) -> float:
    """Percent of samples whose predicted action is one of the optimal actions."""
    if len(batch) == 0:
        raise DomainError("ASA needs at least one sample")
    predicted = predict_actions(network, batch)
    return float(((batch.masks >> predicted) & 1).mean() * 100.0)


def majority_baseline(train: SampleBatch, test: SampleBatch) -> float:
    """ASA of always predicting the most frequent training label."""
    majority = int(np.bincount(train.labels, minlength=NUM_ACTIONS).argmax())
    return float(((test.masks >> majority) & 1).mean() * 100.0)


@dataclass
class EpochStats:
    epoch: int
    loss: float
    asa: float
    seconds: float


@dataclass
class VINTrainingReport:
    epochs: list[EpochStats] = field(default_factory=list)
    steps: int = 0
    final_asa: float = 0.0
    majority_asa: float = 0.0

    def curves(self) -> dict[str, list[float]]:
        return {"loss": [e.loss for e in self.epochs], "asa": [e.asa for e in self.epochs]}


EpochCallback = Callable[[int, Optimizer, np.random.Generator], None]
BatchLoss = Callable[[SampleBatch], Tensor]


def _fit(
    params: ParamSet,
    batch_loss: BatchLoss,
    evaluate: Callable[[], float],
    train: SampleBatch,
    config: VINTrainingConfig,
    report: VINTrainingReport,
    optimizer_state: dict[str, np.ndarray] | None,
    start_epoch: int,
    shuffle_rng: np.random.Generator,
    on_epoch: EpochCallback | None,
    label: str,
) -> None:
    optimizer = build_optimizer(params, config.optimizer_config())
    if optimizer_state:
        optimizer.load_state(optimizer_state)
    report.steps = optimizer.steps
    for epoch in range(start_epoch, config.epochs):
        started = time.monotonic()
        order = shuffle_rng.permutation(len(train))
        losses = []
        for begin in range(0, len(train), config.batch_size):
            loss = batch_loss(train.take(order[begin:begin + config.batch_size]))
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingDivergedError(report.steps, value, {"epoch": epoch, "grad_norm": params.grad_norm()})
            loss.backward()
            optimizer.step()
            report.steps += 1
            losses.append(value)
        stats = EpochStats(epoch + 1, float(np.mean(losses)), evaluate(), time.monotonic() - started)
        report.epochs.append(stats)
        logger.info(
            f"{label} epoch {stats.epoch}/{config.epochs}: loss={stats.loss:.4f} "
            f"asa={stats.asa:.2f}% ({stats.seconds:.1f}s)"
        )
        if on_epoch is not None:
            on_epoch(epoch + 1, optimizer, shuffle_rng)


def train_vin(
    config: VINTrainingConfig,
    train: SampleBatch,
    test: SampleBatch,
    network: ValueIterationNetwork | None = None,
    optimizer_state: dict[str, np.ndarray] | None = None,
    start_epoch: int = 0,
    shuffle_rng: np.random.Generator | None = None,
    on_epoch: EpochCallback | None = None,
) -> tuple[ValueIterationNetwork, VINTrainingReport]:
    """Supervised cross-entropy training on full-observability samples."""
    network = network or ValueIterationNetwork.initialize(
        config.architecture(), np.random.default_rng([config.seed, 2])
    )
    report = VINTrainingReport()

    def batch_loss(batch: SampleBatch) -> Tensor:
        return ops.cross_entropy_loss(logits_for(network, batch, Tensor(batch.images())), batch.labels)

    _fit(
        network.trainable(),
        batch_loss,
        lambda: evaluate_asa(network, test),
        train,
        config,
        report,
        optimizer_state,
        start_epoch,
        shuffle_rng or np.random.default_rng([config.seed, 1]),
        on_epoch,
        "vin",
    )
    report.final_asa = evaluate_asa(network, test)
    report.majority_asa = majority_baseline(train, test)
    return network, report


def fine_tune_end_to_end(
    config: VINTrainingConfig,
    memory: MemoryNetwork,
    network: ValueIterationNetwork,
    train: SampleBatch,
    test: SampleBatch,
    shuffle_rng: np.random.Generator | None = None,
) -> VINTrainingReport:
    """Jointly update memory and VIN: the belief fed to the VIN is ``decode(encode(map))``."""
    if memory.arch.width != train.maps.shape[2] or memory.arch.height != train.maps.shape[1]:
        raise ConfigurationError("MM checkpoint map size does not match the samples")
    report = VINTrainingReport()

    def batch_loss(batch: SampleBatch) -> Tensor:
        beliefs = memory.decode_tensor(memory.encode_tensor(Tensor(batch.maps)))
        inputs = ops.concat(
            [ops.reshape(beliefs, (len(batch), 1, *beliefs.shape[1:])), Tensor(batch.goal_images()[:, None])],
            axis=1,
        )
        return ops.cross_entropy_loss(logits_for(network, batch, inputs), batch.labels)

    def evaluate() -> float:
        predicted = []
        for begin in range(0, len(test), EVAL_BATCH):
            part = test.take(np.arange(begin, min(begin + EVAL_BATCH, len(test))))
            beliefs = memory.decode_batch(memory.encode_batch(part.maps))
            with no_grad():
                logits = logits_for(network, part, Tensor(part.images(beliefs))).data
            predicted.append(np.argmax(logits, axis=1))
        return float(((test.masks >> np.concatenate(predicted)) & 1).mean() * 100.0)

    _fit(
        memory.params.merged(network.trainable()),
        batch_loss,
        evaluate,
        train,
        config,
        report,
        None,
        0,
        shuffle_rng or np.random.default_rng([config.seed, 3]),
        None,
        "end-to-end",
    )
    report.final_asa = evaluate()
    report.majority_asa = majority_baseline(train, test)
    return report
