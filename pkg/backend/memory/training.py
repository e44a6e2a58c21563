"""
Training and evaluation of the memory network on (M1, M2, M1 OR M2) triples.

Each source map is, with equal probability, a receptive-window mask of a
Complex base map or a full Complex map. One base map is drawn per triple so
windows of both sources come from the same world.
"""

import logging
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from autodiff import ops
from autodiff.optim import Optimizer, OptimizerConfig, build_optimizer
from autodiff.tensor import Tensor
from core.exceptions import ConfigurationError, DomainError, TrainingDivergedError
from gridworld.container import is_test_index
from gridworld.generators import generate_complex_map
from gridworld.types import CellPos, OccupancyGrid
from gridworld.world import observe

from .network import MemoryNetwork
from .types import AggregatorKind, MemoryModel, MMArchitecture

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MMTrainingConfig:
    width: int = 12
    height: int = 12
    embedding_size: int = 32
    encoder: str = "conv"
    share_aggregators: bool = True
    train_triples: int = 50_000
    test_triples: int = 2_000
    pool_maps: int = 2_000
    fill: float = 0.35
    window_probability: float = 0.5
    min_half_width: int = 2
    max_half_width: int = 4
    epochs: int = 10
    batch_size: int = 64
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    loss_weights: tuple[float, ...] = (1.0, 1.0, 1.0)
    invariant_pairs: int = 1_000
    seed: int = 0
    dataset: Path | None = None
    sweep_h: tuple[int, ...] = ()
    out: Path = Path("var/models/mm")

    def __post_init__(self) -> None:
        if self.train_triples < 1 or self.test_triples < 1:
            raise ConfigurationError("Need at least one training and one test triple")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("Epochs and batch size must be >= 1")
        if len(self.loss_weights) != 3:
            raise ConfigurationError(f"Need three loss weights, got {self.loss_weights}")
        if not 0 <= self.min_half_width <= self.max_half_width:
            raise ConfigurationError("Half-width range must satisfy 0 <= min <= max")
        if not 0.0 <= self.window_probability <= 1.0:
            raise ConfigurationError("Window probability must be in [0, 1]")
        if any(h < 1 for h in self.sweep_h):
            raise ConfigurationError(f"Embedding sizes must be >= 1, got {self.sweep_h}")

    def architecture(self) -> MMArchitecture:
        return MMArchitecture(
            width=self.width,
            height=self.height,
            embedding_size=self.embedding_size,
            encoder=self.encoder,
            share_aggregators=self.share_aggregators,
        )

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(kind=self.optimizer, learning_rate=self.learning_rate)


@dataclass(frozen=True, eq=False)
class TripleSet:
    """Stacked ``[N, Y, X]`` source maps and their cell-wise OR."""

    first: np.ndarray
    second: np.ndarray
    union: np.ndarray

    def __len__(self) -> int:
        return int(self.first.shape[0])

    def take(self, index: np.ndarray) -> "TripleSet":
        return TripleSet(self.first[index], self.second[index], self.union[index])


class TripleSampler:
    """Draws training triples from a pool of base maps."""

    def __init__(
        self,
        width: int,
        height: int,
        rng: np.random.Generator,
        pool_maps: int = 2_000,
        fill: float = 0.35,
        window_probability: float = 0.5,
        half_width_range: tuple[int, int] = (2, 4),
        source_maps: Sequence[OccupancyGrid] | None = None,
    ) -> None:
        self.width = width
        self.height = height
        self.rng = rng
        self.window_probability = window_probability
        self.half_width_range = half_width_range
        if source_maps:
            too_small = [g for g in source_maps if g.width < width or g.height < height]
            if too_small:
                raise ConfigurationError(
                    f"Source maps must be at least {width}x{height}", smallest=too_small[0].shape
                )
            self.pool = [g.cells for g in source_maps]
        else:
            self.pool = [generate_complex_map(width, height, fill, rng).cells for _ in range(pool_maps)]

    def _base(self) -> np.ndarray:
        cells = self.pool[int(self.rng.integers(len(self.pool)))]
        oy = int(self.rng.integers(cells.shape[0] - self.height + 1))
        ox = int(self.rng.integers(cells.shape[1] - self.width + 1))
        return cells[oy:oy + self.height, ox:ox + self.width]

    def _source(self, base: np.ndarray) -> np.ndarray:
        if self.rng.random() >= self.window_probability:
            return base.copy()
        grid = OccupancyGrid(base)
        free = grid.free_cells()
        pos = free[int(self.rng.integers(len(free)))] if free else CellPos(0, 0)
        low, high = self.half_width_range
        half_width = int(self.rng.integers(low, high + 1))
        return observe(grid, pos, half_width).grid

    def sample(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        base = self._base()
        first = self._source(base)
        second = self._source(base)
        return first, second, np.maximum(first, second)

    def sample_set(self, count: int) -> TripleSet:
        triples = [self.sample() for _ in range(count)]
        if not triples:
            empty = np.zeros((0, self.height, self.width), dtype=np.uint8)
            return TripleSet(empty, empty, empty)
        first, second, union = (np.stack(parts).astype(np.uint8) for parts in zip(*triples, strict=True))
        return TripleSet(first, second, union)


def triple_loss(network: MemoryNetwork, batch: TripleSet, weights: Sequence[float]) -> Tensor:
    """Weighted sum of BCE for M1, M2 and the OR reconstructed through the aggregator."""
    first = network.encode_tensor(Tensor(batch.first))
    second = network.encode_tensor(Tensor(batch.second))
    terms = [
        ops.bce_loss(network.decode_tensor(first), batch.first),
        ops.bce_loss(network.decode_tensor(second), batch.second),
    ]
    kinds = [AggregatorKind.OBSERVATION] if network.arch.share_aggregators else list(AggregatorKind)
    union_terms = [
        ops.bce_loss(network.decode_tensor(network.aggregate_tensor(first, second, kind)), batch.union)
        for kind in kinds
    ]
    terms.append(ops.weighted_sum(union_terms, [1.0 / len(union_terms)] * len(union_terms)))
    return ops.weighted_sum(terms, list(weights))


def _cell_accuracy(predicted: np.ndarray, target: np.ndarray) -> float:
    return float(((predicted >= 0.5) == (target >= 0.5)).mean() * 100.0)


def reconstruction_accuracy(
    memory: MemoryModel,
    triples: TripleSet,
    which: AggregatorKind = AggregatorKind.OBSERVATION,
) -> float:
    """Percent of cells where ``decode(aggregate(encode(M1), encode(M2)))`` thresholds to ``M1 OR M2``."""
    if len(triples) == 0:
        raise DomainError("Reconstruction accuracy needs a non-empty test set")
    if isinstance(memory, MemoryNetwork):
        merged = memory.aggregate_batch(
            memory.encode_batch(triples.first), memory.encode_batch(triples.second), which
        )
        decoded = memory.decode_batch(merged)
    else:
        decoded = np.stack([
            memory.decode(memory.aggregate(memory.encode(a), memory.encode(b), which))
            for a, b in zip(triples.first, triples.second, strict=True)
        ])
    return _cell_accuracy(decoded, triples.union)


def invariant_rates(memory: MemoryNetwork, triples: TripleSet) -> dict[str, float]:
    """Statistical OR-identity, idempotence and symmetry rates over held-out pairs."""
    if len(triples) == 0:
        raise DomainError("Invariant rates need a non-empty set of pairs")
    first = memory.encode_batch(triples.first)
    second = memory.encode_batch(triples.second)
    empty = np.repeat(memory.empty_embedding()[None], len(triples), axis=0)
    kind = AggregatorKind.OBSERVATION
    forward = _cell_accuracy(memory.decode_batch(memory.aggregate_batch(first, second, kind)), triples.union)
    backward = _cell_accuracy(memory.decode_batch(memory.aggregate_batch(second, first, kind)), triples.union)
    return {
        "or_identity": _cell_accuracy(
            memory.decode_batch(memory.aggregate_batch(first, empty, kind)), triples.first
        ),
        "idempotence": _cell_accuracy(
            memory.decode_batch(memory.aggregate_batch(first, first, kind)), triples.first
        ),
        "symmetry_gap": abs(forward - backward),
        "empty_decodes_free": float((memory.decode(empty[0]) < 0.5).mean() * 100.0),
    }


@dataclass
class EpochStats:
    epoch: int
    loss: float
    accuracy: float
    seconds: float


@dataclass
class MMTrainingReport:
    epochs: list[EpochStats] = field(default_factory=list)
    steps: int = 0
    final_accuracy: float = 0.0
    invariants: dict[str, float] = field(default_factory=dict)

    def curves(self) -> dict[str, list[float]]:
        return {
            "loss": [e.loss for e in self.epochs],
            "accuracy": [e.accuracy for e in self.epochs],
        }


EpochCallback = Callable[[int, MemoryNetwork, Optimizer, np.random.Generator], None]


def train_mm(
    config: MMTrainingConfig,
    train: TripleSet,
    test: TripleSet,
    network: MemoryNetwork | None = None,
    optimizer_state: dict[str, np.ndarray] | None = None,
    start_epoch: int = 0,
    shuffle_rng: np.random.Generator | None = None,
    on_epoch: EpochCallback | None = None,
) -> tuple[MemoryNetwork, MMTrainingReport]:
    """
    Jointly train encoder, decoder and aggregators.

    ``network``, ``optimizer_state``, ``start_epoch`` and ``shuffle_rng`` resume a
    previous run; ``on_epoch`` is called after every epoch (checkpointing).
    """
    if len(train) == 0:
        raise ConfigurationError("Training set is empty")
    if network is None:
        network = MemoryNetwork.initialize(config.architecture(), np.random.default_rng([config.seed, 2]))
    shuffle_rng = shuffle_rng or np.random.default_rng([config.seed, 1])
    optimizer = build_optimizer(network.params, config.optimizer_config())
    if optimizer_state:
        optimizer.load_state(optimizer_state)

    report = MMTrainingReport(steps=optimizer.steps)
    for epoch in range(start_epoch, config.epochs):
        started = time.monotonic()
        order = shuffle_rng.permutation(len(train))
        losses = []
        for begin in range(0, len(train), config.batch_size):
            batch = train.take(order[begin:begin + config.batch_size])
            loss = triple_loss(network, batch, config.loss_weights)
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingDivergedError(
                    report.steps, value, {"epoch": epoch, "grad_norm": network.params.grad_norm()}
                )
            loss.backward()
            optimizer.step()
            report.steps += 1
            losses.append(value)
        accuracy = reconstruction_accuracy(network, test)
        stats = EpochStats(epoch + 1, float(np.mean(losses)), accuracy, time.monotonic() - started)
        report.epochs.append(stats)
        logger.info(
            f"mm epoch {stats.epoch}/{config.epochs}: loss={stats.loss:.4f} "
            f"accuracy={stats.accuracy:.2f}% ({stats.seconds:.1f}s)"
        )
        if on_epoch is not None:
            on_epoch(epoch + 1, network, optimizer, shuffle_rng)

    report.final_accuracy = reconstruction_accuracy(network, test)
    report.invariants = invariant_rates(network, test.take(np.arange(min(len(test), config.invariant_pairs))))
    return network, report


def build_triple_sets(
    config: MMTrainingConfig, source_maps: Sequence[OccupancyGrid] | None = None
) -> tuple[TripleSet, TripleSet]:
    """Deterministic train and held-out triple sets for ``config.seed``."""
    def sampler(index: int, maps: Sequence[OccupancyGrid] | None, pool: int) -> TripleSampler:
        return TripleSampler(
            config.width,
            config.height,
            np.random.default_rng([config.seed, 0, index]),
            pool_maps=pool,
            fill=config.fill,
            window_probability=config.window_probability,
            half_width_range=(config.min_half_width, config.max_half_width),
            source_maps=maps,
        )

    train_maps = test_maps = None
    if source_maps:
        train_maps = [g for i, g in enumerate(source_maps) if not is_test_index(i)]
        test_maps = [g for i, g in enumerate(source_maps) if is_test_index(i)] or train_maps
    train = sampler(0, train_maps, config.pool_maps).sample_set(config.train_triples)
    test = sampler(1, test_maps, max(1, config.pool_maps // 5)).sample_set(config.test_triples)
    return train, test
