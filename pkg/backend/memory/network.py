"""
The learned memory network: encoder (map → H), decoder (H → map) and the
aggregators that realize an OR of the two source maps in embedding space.

Conv encoder: pad to a multiple of 4, two conv(3×3)+ReLU+maxpool(2) stages,
dense to H. Conv decoder mirrors it with nearest upsampling and ends in a
sigmoid. Aggregators are MLPs on ``[e1; e2]`` (2H → 2H → 2H → H).
"""

import logging
from pathlib import Path
from typing import Any

import numpy as np

from autodiff import ops
from autodiff.checkpoint import check_against, load_checkpoint, save_checkpoint
from autodiff.gradcheck import GradCheckReport, gradient_check
from autodiff.params import ParamSet
from autodiff.tensor import Tensor, no_grad
from core.exceptions import CheckpointError, ShapeError

from .types import AggregatorKind, EncoderKind, MMArchitecture

logger = logging.getLogger(__name__)

PREFIX = "mm."
FLOAT_BITS = 32


def _aggregator_prefix(arch: MMArchitecture, which: AggregatorKind) -> str:
    if arch.share_aggregators:
        return f"{PREFIX}aggregator.shared"
    return f"{PREFIX}aggregator.{AggregatorKind(which).value}"


def init_params(arch: MMArchitecture, rng: np.random.Generator) -> ParamSet:
    params = ParamSet()
    h = arch.embedding_size
    if arch.encoder is EncoderKind.CONV:
        c1, c2 = arch.conv_channels
        flat = int(np.prod(arch.bottleneck_shape))
        params.add_conv(f"{PREFIX}encoder.conv1", 1, c1, 3, rng)
        params.add_conv(f"{PREFIX}encoder.conv2", c1, c2, 3, rng)
        params.add_dense(f"{PREFIX}encoder.dense", flat, h, rng)
        params.add_dense(f"{PREFIX}decoder.dense", h, flat, rng)
        params.add_conv(f"{PREFIX}decoder.conv1", c2, c1, 3, rng)
        params.add_conv(f"{PREFIX}decoder.conv2", c1, 1, 3, rng)
    else:
        cells = arch.width * arch.height
        params.add_dense(f"{PREFIX}encoder.hidden", cells, arch.mlp_hidden, rng)
        params.add_dense(f"{PREFIX}encoder.out", arch.mlp_hidden, h, rng)
        params.add_dense(f"{PREFIX}decoder.hidden", h, arch.mlp_hidden, rng)
        params.add_dense(f"{PREFIX}decoder.out", arch.mlp_hidden, cells, rng)

    kinds = [AggregatorKind.OBSERVATION] if arch.share_aggregators else list(AggregatorKind)
    for kind in kinds:
        prefix = _aggregator_prefix(arch, kind)
        params.add_dense(f"{prefix}.l1", 2 * h, 2 * h, rng)
        params.add_dense(f"{prefix}.l2", 2 * h, 2 * h, rng)
        params.add_dense(f"{prefix}.l3", 2 * h, h, rng)
    return params


class MemoryNetwork:
    """Learned ``MemoryModel``; the numpy methods run without recording a graph."""

    def __init__(self, arch: MMArchitecture, params: ParamSet) -> None:
        self.arch = arch
        self.params = params
        self.width = arch.width
        self.height = arch.height

    @classmethod
    def initialize(cls, arch: MMArchitecture, rng: np.random.Generator) -> "MemoryNetwork":
        return cls(arch, init_params(arch, rng))

    @property
    def embedding_size(self) -> int:
        return self.arch.embedding_size

    @property
    def message_bits(self) -> int:
        return self.arch.embedding_size * FLOAT_BITS

    def _p(self, name: str) -> Tensor:
        return self.params[f"{PREFIX}{name}"]

    def _check_maps(self, maps: Tensor) -> None:
        if maps.ndim != 3 or maps.shape[1:] != (self.height, self.width):
            raise ShapeError("map batch", expected=(-1, self.height, self.width), actual=maps.shape)

    def _check_embeddings(self, embeddings: Tensor) -> None:
        if embeddings.ndim != 2 or embeddings.shape[1] != self.embedding_size:
            raise ShapeError("embedding batch", expected=(-1, self.embedding_size), actual=embeddings.shape)

    def encode_tensor(self, maps: Tensor) -> Tensor:
        """``[B, Y, X]`` maps in [0, 1] → ``[B, H]`` embeddings."""
        self._check_maps(maps)
        batch = maps.shape[0]
        if self.arch.encoder is EncoderKind.MLP:
            x = ops.reshape(maps, (batch, self.width * self.height))
            x = ops.relu(ops.dense(x, self._p("encoder.hidden.weight"), self._p("encoder.hidden.bias")))
            return ops.dense(x, self._p("encoder.out.weight"), self._p("encoder.out.bias"))

        x = ops.reshape(maps, (batch, 1, self.height, self.width))
        x = ops.pad2d(x, self.arch.padded_height - self.height, self.arch.padded_width - self.width)
        x = ops.max_pool2d(ops.relu(ops.conv2d(x, self._p("encoder.conv1.weight"), self._p("encoder.conv1.bias"))))
        x = ops.max_pool2d(ops.relu(ops.conv2d(x, self._p("encoder.conv2.weight"), self._p("encoder.conv2.bias"))))
        x = ops.reshape(x, (batch, int(np.prod(self.arch.bottleneck_shape))))
        return ops.dense(x, self._p("encoder.dense.weight"), self._p("encoder.dense.bias"))

    def decode_tensor(self, embeddings: Tensor) -> Tensor:
        """``[B, H]`` embeddings → ``[B, Y, X]`` occupancy probabilities."""
        self._check_embeddings(embeddings)
        batch = embeddings.shape[0]
        if self.arch.encoder is EncoderKind.MLP:
            x = ops.relu(ops.dense(embeddings, self._p("decoder.hidden.weight"), self._p("decoder.hidden.bias")))
            x = ops.dense(x, self._p("decoder.out.weight"), self._p("decoder.out.bias"))
            return ops.reshape(ops.sigmoid(x), (batch, self.height, self.width))

        x = ops.relu(ops.dense(embeddings, self._p("decoder.dense.weight"), self._p("decoder.dense.bias")))
        x = ops.reshape(x, (batch, *self.arch.bottleneck_shape))
        x = ops.relu(ops.conv2d(ops.upsample2d(x), self._p("decoder.conv1.weight"), self._p("decoder.conv1.bias")))
        x = ops.conv2d(ops.upsample2d(x), self._p("decoder.conv2.weight"), self._p("decoder.conv2.bias"))
        x = ops.crop2d(x, self.height, self.width)
        return ops.reshape(ops.sigmoid(x), (batch, self.height, self.width))

    def aggregate_tensor(self, first: Tensor, second: Tensor, which: AggregatorKind) -> Tensor:
        self._check_embeddings(first)
        self._check_embeddings(second)
        prefix = _aggregator_prefix(self.arch, which)
        p = self.params
        x = ops.concat([first, second], axis=1)
        x = ops.relu(ops.dense(x, p[f"{prefix}.l1.weight"], p[f"{prefix}.l1.bias"]))
        x = ops.relu(ops.dense(x, p[f"{prefix}.l2.weight"], p[f"{prefix}.l2.bias"]))
        return ops.dense(x, p[f"{prefix}.l3.weight"], p[f"{prefix}.l3.bias"])

    def encode(self, grid: np.ndarray) -> np.ndarray:
        with no_grad():
            return self.encode_tensor(Tensor(np.asarray(grid)[None])).data[0]

    def encode_batch(self, grids: np.ndarray) -> np.ndarray:
        with no_grad():
            return self.encode_tensor(Tensor(grids)).data

    def decode(self, embedding: np.ndarray) -> np.ndarray:
        with no_grad():
            return self.decode_tensor(Tensor(np.asarray(embedding)[None])).data[0]

    def decode_batch(self, embeddings: np.ndarray) -> np.ndarray:
        with no_grad():
            return self.decode_tensor(Tensor(embeddings)).data

    def aggregate(self, first: np.ndarray, second: np.ndarray, which: AggregatorKind) -> np.ndarray:
        with no_grad():
            return self.aggregate_tensor(Tensor(first[None]), Tensor(second[None]), which).data[0]

    def aggregate_batch(self, first: np.ndarray, second: np.ndarray, which: AggregatorKind) -> np.ndarray:
        with no_grad():
            return self.aggregate_tensor(Tensor(first), Tensor(second), which).data

    def empty_embedding(self) -> np.ndarray:
        """``e₀ = encode(all-free map)``, the initial embedding of every robot."""
        return self.encode(np.zeros((self.height, self.width)))

    def save(self, directory: Path, extra: dict[str, Any] | None = None) -> None:
        metadata = {"module": "mm", "architecture": self.arch.to_dict(), **(extra or {})}
        save_checkpoint(self.params, directory, metadata)

    @classmethod
    def load(cls, directory: Path) -> "MemoryNetwork":
        params, metadata = load_checkpoint(directory)
        if metadata.get("module") != "mm":
            raise CheckpointError("Not a memory-network checkpoint", directory)
        arch = MMArchitecture.from_dict(metadata["architecture"])
        check_against(params, init_params(arch, np.random.default_rng(0)), directory)
        params.cast()
        logger.info(f"Loaded memory network H={arch.embedding_size} {arch.width}x{arch.height} from {directory}")
        return cls(arch, params)


def stack_gradient_check(
    rng: np.random.Generator,
    tolerance: float | None = None,
    arch: MMArchitecture | None = None,
) -> GradCheckReport:
    """Finite-difference check of encoder → aggregator → decoder at random init."""
    arch = arch or MMArchitecture(width=7, height=7, embedding_size=4, conv_channels=(2, 3))
    network = MemoryNetwork.initialize(arch, rng)
    for tensor in network.params.values():
        tensor.data = (tensor.data + rng.normal(0.0, 0.1, tensor.shape)).astype(tensor.data.dtype)
    first = rng.random((2, arch.height, arch.width))
    second = rng.random((2, arch.height, arch.width))
    target = rng.random((2, arch.height, arch.width))

    def loss() -> Tensor:
        e1 = network.encode_tensor(Tensor(first))
        e2 = network.encode_tensor(Tensor(second))
        merged = network.aggregate_tensor(e1, e2, AggregatorKind.MESSAGE)
        return ops.bce_loss(network.decode_tensor(merged), target)

    return gradient_check(loss, network.params, f"mm-stack-{arch.encoder.value}", tolerance, rng=rng)
