"""Gradient checks for each layer type at random initialization."""

from collections.abc import Callable

import numpy as np

from . import ops
from .gradcheck import GradCheckReport, gradient_check
from .params import ParamSet
from .tensor import Tensor

LayerCheck = Callable[[np.random.Generator, float | None], GradCheckReport]


def _jitter(params: ParamSet, rng: np.random.Generator, scale: float = 0.1) -> None:
    """Move biases off zero so no ReLU sits exactly on its kink."""
    for name, tensor in params.items():
        tensor.data = (tensor.data + rng.normal(0.0, scale, tensor.shape)).astype(tensor.data.dtype)


def check_dense(rng: np.random.Generator, tolerance: float | None = None) -> GradCheckReport:
    params = ParamSet()
    params.add_dense("dense", 6, 4, rng)
    _jitter(params, rng)
    inputs = rng.normal(size=(5, 6))
    targets = rng.random((5, 4))

    def loss() -> Tensor:
        out = ops.sigmoid(ops.dense(Tensor(inputs), params["dense.weight"], params["dense.bias"]))
        return ops.bce_loss(out, targets)

    return gradient_check(loss, params, "dense+sigmoid+bce", tolerance, rng=rng)


def check_conv_channel_max(rng: np.random.Generator, tolerance: float | None = None) -> GradCheckReport:
    params = ParamSet()
    params.add_conv("conv", 2, 8, 3, rng)
    params.add_dense("head", 1, 8, rng)
    _jitter(params, rng)
    images = rng.normal(size=(2, 2, 5, 5))
    labels = rng.integers(0, 8, size=6)
    ys, xs = rng.integers(0, 5, size=6), rng.integers(0, 5, size=6)
    batch = np.arange(6) % 2

    def loss() -> Tensor:
        q = ops.conv2d(Tensor(images), params["conv.weight"], params["conv.bias"])
        value, _ = ops.channel_max(q, keepdims=True)
        cells = ops.gather_cells(value, batch, ys, xs)
        logits = ops.dense(cells, params["head.weight"], params["head.bias"])
        return ops.cross_entropy_loss(logits, labels)

    return gradient_check(loss, params, "conv2d+channel_max+cross_entropy", tolerance, rng=rng)


def check_pool_upsample(rng: np.random.Generator, tolerance: float | None = None) -> GradCheckReport:
    params = ParamSet()
    params.add_conv("down", 1, 3, 3, rng)
    params.add_conv("up", 3, 1, 3, rng)
    _jitter(params, rng)
    images = rng.normal(size=(2, 1, 6, 5))
    targets = rng.random((2, 1, 5, 5))

    def loss() -> Tensor:
        x = ops.pad2d(Tensor(images), 0, 1)
        x = ops.max_pool2d(ops.relu(ops.conv2d(x, params["down.weight"], params["down.bias"])))
        x = ops.conv2d(ops.upsample2d(x), params["up.weight"], params["up.bias"])
        return ops.bce_loss(ops.sigmoid(ops.crop2d(x, 5, 5)), targets)

    return gradient_check(loss, params, "pool+upsample+pad+crop", tolerance, rng=rng)


def check_softmax(rng: np.random.Generator, tolerance: float | None = None) -> GradCheckReport:
    params = ParamSet()
    params.add_dense("proj", 4, 8, rng)
    _jitter(params, rng)
    inputs = rng.normal(size=(3, 4))
    weights = rng.normal(size=(3, 8))

    def loss() -> Tensor:
        probs = ops.softmax(ops.dense(Tensor(inputs), params["proj.weight"], params["proj.bias"]))
        scored = ops.dense(ops.reshape(probs, (1, 24)), Tensor(weights.reshape(1, 24)))
        return ops.reshape(scored, ())

    return gradient_check(loss, params, "softmax", tolerance, rng=rng)


def check_concat(rng: np.random.Generator, tolerance: float | None = None) -> GradCheckReport:
    params = ParamSet()
    params.add_dense("left", 3, 4, rng)
    params.add_dense("right", 3, 4, rng)
    params.add_dense("merge", 8, 2, rng)
    _jitter(params, rng)
    inputs = rng.normal(size=(4, 3))
    labels = rng.integers(0, 2, size=4)

    def loss() -> Tensor:
        x = Tensor(inputs)
        left = ops.relu(ops.dense(x, params["left.weight"], params["left.bias"]))
        right = ops.dense(x, params["right.weight"], params["right.bias"])
        merged = ops.dense(ops.concat([left, right], axis=1), params["merge.weight"], params["merge.bias"])
        return ops.cross_entropy_loss(merged, labels)

    return gradient_check(loss, params, "concat+relu", tolerance, rng=rng)


LAYER_CHECKS: tuple[LayerCheck, ...] = (
    check_dense,
    check_conv_channel_max,
    check_pool_upsample,
    check_softmax,
    check_concat,
)
