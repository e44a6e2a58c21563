"""
Differentiable ops.

Conventions: images are ``[B, C, H, W]`` (or unbatched ``[C, H, W]`` where
noted), dense inputs are ``[B, in]`` or ``[in]``, dense weights ``[out, in]``.
Shape disagreements raise ``ShapeError`` reporting both shapes.
"""

from collections.abc import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from core.exceptions import ConfigurationError, DomainError, ShapeError

from .tensor import Tensor

BCE_EPSILON = 1e-7


def _push(tensor: Tensor, grad: np.ndarray) -> None:
    if tensor.needs_grad:
        tensor.accumulate(grad)


def as_tensor(value: Tensor | np.ndarray | float) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError("add operands differ", expected=a.shape, actual=b.shape)
    out = Tensor.from_op(a.data + b.data, (a, b), "add")
    if out.needs_grad:
        def _backward() -> None:
            _push(a, out.grad)
            _push(b, out.grad)

        out._backward = _backward
    return out


def scale(x: Tensor, factor: float) -> Tensor:
    out = Tensor.from_op(x.data * x.data.dtype.type(factor), (x,), "scale")
    if out.needs_grad:
        def _backward() -> None:
            _push(x, out.grad * factor)

        out._backward = _backward
    return out


def weighted_sum(terms: Sequence[Tensor], weights: Sequence[float]) -> Tensor:
    total = scale(terms[0], weights[0])
    for term, weight in zip(terms[1:], weights[1:], strict=True):
        total = add(total, scale(term, weight))
    return total


def dense(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight.T + bias`` for ``x`` of shape ``[in]`` or ``[B, in]``."""
    if weight.ndim != 2 or x.shape[-1] != weight.shape[1] or x.ndim not in (1, 2):
        raise ShapeError("dense input does not match weight", expected=(weight.shape[1],), actual=x.shape)
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ShapeError("dense bias does not match weight", expected=(weight.shape[0],), actual=bias.shape)
    data = x.data @ weight.data.T
    if bias is not None:
        data = data + bias.data
    parents = (x, weight) if bias is None else (x, weight, bias)
    out = Tensor.from_op(data, parents, "dense")
    if out.needs_grad:
        def _backward() -> None:
            g = out.grad
            _push(x, g @ weight.data)
            if x.ndim == 1:
                _push(weight, np.outer(g, x.data))
            else:
                _push(weight, g.T @ x.data)
            if bias is not None:
                _push(bias, g if g.ndim == 1 else g.sum(axis=0))

        out._backward = _backward
    return out


def _batched(x: Tensor, op: str) -> bool:
    if x.ndim == 4:
        return True
    if x.ndim == 3:
        return False
    raise ShapeError(f"{op} expects [C,H,W] or [B,C,H,W]", actual=x.shape)


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor | None = None) -> Tensor:
    """
    Same-size 2-D convolution (cross-correlation) with zero padding ``k // 2``.

    ``kernel`` is ``[out, in, k, k]`` with odd ``k``; bias is ``[out]``.
    """
    batched = _batched(x, "conv2d")
    if kernel.ndim != 4 or kernel.shape[2] != kernel.shape[3]:
        raise ShapeError("conv2d kernel must be [out, in, k, k]", actual=kernel.shape)
    k = kernel.shape[2]
    if k % 2 == 0:
        raise ConfigurationError(f"conv2d kernel size must be odd, got {k}")
    xb = x.data if batched else x.data[None]
    if xb.shape[1] != kernel.shape[1]:
        raise ShapeError("conv2d input channels", expected=(kernel.shape[1],), actual=(xb.shape[1],))
    if bias is not None and bias.shape != (kernel.shape[0],):
        raise ShapeError("conv2d bias", expected=(kernel.shape[0],), actual=bias.shape)

    pad = k // 2
    height, width = xb.shape[2], xb.shape[3]
    padded = np.pad(xb, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(padded, (k, k), axis=(2, 3))
    data = np.einsum("bchwij,ocij->bohw", windows, kernel.data, optimize=True)
    if bias is not None:
        data = data + bias.data[None, :, None, None]
    parents = (x, kernel) if bias is None else (x, kernel, bias)
    out = Tensor.from_op(data if batched else data[0], parents, "conv2d")
    if out.needs_grad:
        def _backward() -> None:
            g = out.grad if batched else out.grad[None]
            _push(kernel, np.einsum("bchwij,bohw->ocij", windows, g, optimize=True))
            if bias is not None:
                _push(bias, g.sum(axis=(0, 2, 3)))
            if x.needs_grad:
                window_grads = np.einsum("bohw,ocij->bchwij", g, kernel.data, optimize=True)
                padded_grad = np.zeros_like(padded)
                for i in range(k):
                    for j in range(k):
                        padded_grad[:, :, i:i + height, j:j + width] += window_grads[..., i, j]
                grad = padded_grad[:, :, pad:pad + height, pad:pad + width]
                x.accumulate(grad if batched else grad[0])

        out._backward = _backward
    return out


def channel_max(x: Tensor, keepdims: bool = False) -> tuple[Tensor, np.ndarray]:
    """Max over the channel axis (``-3``); ties resolve to the first channel."""
    _batched(x, "channel_max")
    argmax = np.argmax(x.data, axis=-3)
    expanded = np.expand_dims(argmax, -3)
    values = np.take_along_axis(x.data, expanded, axis=-3)
    out = Tensor.from_op(values if keepdims else np.squeeze(values, -3), (x,), "channel_max")
    if out.needs_grad:
        def _backward() -> None:
            g = out.grad if keepdims else np.expand_dims(out.grad, -3)
            grad = np.zeros_like(x.data)
            np.put_along_axis(grad, expanded, g, axis=-3)
            _push(x, grad)

        out._backward = _backward
    return out, argmax


def max_pool2d(x: Tensor, size: int = 2) -> Tensor:
    """Non-overlapping max pooling; H and W must be divisible by ``size``."""
    if x.ndim != 4:
        raise ShapeError("max_pool2d expects [B,C,H,W]", actual=x.shape)
    b, c, h, w = x.shape
    if h % size or w % size:
        raise ShapeError(f"max_pool2d needs H, W divisible by {size}", actual=x.shape)
    blocks = (
        x.data.reshape(b, c, h // size, size, w // size, size)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(b, c, h // size, w // size, size * size)
    )
    choice = np.argmax(blocks, axis=-1)
    data = np.take_along_axis(blocks, choice[..., None], axis=-1)[..., 0]
    out = Tensor.from_op(data, (x,), "max_pool2d")
    if out.needs_grad:
        def _backward() -> None:
            grad_blocks = np.zeros_like(blocks)
            np.put_along_axis(grad_blocks, choice[..., None], out.grad[..., None], axis=-1)
            grad = (
                grad_blocks.reshape(b, c, h // size, w // size, size, size)
                .transpose(0, 1, 2, 4, 3, 5)
                .reshape(b, c, h, w)
            )
            _push(x, grad)

        out._backward = _backward
    return out


def upsample2d(x: Tensor, factor: int = 2) -> Tensor:
    """Nearest-neighbor upsampling of the two trailing axes."""
    if x.ndim != 4:
        raise ShapeError("upsample2d expects [B,C,H,W]", actual=x.shape)
    data = x.data.repeat(factor, axis=2).repeat(factor, axis=3)
    out = Tensor.from_op(data, (x,), "upsample2d")
    if out.needs_grad:
        def _backward() -> None:
            b, c, h, w = x.shape
            _push(x, out.grad.reshape(b, c, h, factor, w, factor).sum(axis=(3, 5)))

        out._backward = _backward
    return out


def pad2d(x: Tensor, bottom: int, right: int) -> Tensor:
    """Zero-pad the bottom rows and right columns of a ``[B,C,H,W]`` tensor."""
    if bottom == 0 and right == 0:
        return x
    h, w = x.shape[-2:]
    data = np.pad(x.data, ((0, 0), (0, 0), (0, bottom), (0, right)))
    out = Tensor.from_op(data, (x,), "pad2d")
    if out.needs_grad:
        def _backward() -> None:
            _push(x, out.grad[..., :h, :w])

        out._backward = _backward
    return out


def crop2d(x: Tensor, height: int, width: int) -> Tensor:
    """Keep the top-left ``height`` × ``width`` corner."""
    if x.shape[-2] == height and x.shape[-1] == width:
        return x
    out = Tensor.from_op(x.data[..., :height, :width], (x,), "crop2d")
    if out.needs_grad:
        def _backward() -> None:
            grad = np.zeros_like(x.data)
            grad[..., :height, :width] = out.grad
            _push(x, grad)

        out._backward = _backward
    return out


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = Tensor.from_op(x.data.reshape(shape), (x,), "reshape")
    if out.needs_grad:
        def _backward() -> None:
            _push(x, out.grad.reshape(x.shape))

        out._backward = _backward
    return out


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    data = np.concatenate([t.data for t in tensors], axis=axis)
    out = Tensor.from_op(data, tuple(tensors), "concat")
    if out.needs_grad:
        sizes = [t.shape[axis] for t in tensors]
        splits = np.cumsum(sizes)[:-1]

        def _backward() -> None:
            for tensor, grad in zip(tensors, np.split(out.grad, splits, axis=axis), strict=True):
                _push(tensor, grad)

        out._backward = _backward
    return out


def relu(x: Tensor) -> Tensor:
    out = Tensor.from_op(np.maximum(x.data, 0), (x,), "relu")
    if out.needs_grad:
        def _backward() -> None:
            _push(x, out.grad * (x.data > 0))

        out._backward = _backward
    return out


def sigmoid(x: Tensor) -> Tensor:
    # split by sign so exp never overflows
    positive = x.data >= 0
    exp_neg = np.exp(-np.abs(x.data))
    data = np.where(positive, 1.0 / (1.0 + exp_neg), exp_neg / (1.0 + exp_neg)).astype(x.data.dtype)
    out = Tensor.from_op(data, (x,), "sigmoid")
    if out.needs_grad:
        def _backward() -> None:
            _push(x, out.grad * data * (1 - data))

        out._backward = _backward
    return out


def softmax_array(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - logits.max(axis=axis, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=axis, keepdims=True)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    data = softmax_array(x.data, axis)
    out = Tensor.from_op(data, (x,), "softmax")
    if out.needs_grad:
        def _backward() -> None:
            g = out.grad
            _push(x, data * (g - (g * data).sum(axis=axis, keepdims=True)))

        out._backward = _backward
    return out


def gather_cells(x: Tensor, batch: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> Tensor:
    """Channel vectors ``x[b, :, y, x]`` for each query, as ``[N, C]``."""
    if x.ndim != 4:
        raise ShapeError("gather_cells expects [B,C,H,W]", actual=x.shape)
    data = x.data[batch, :, ys, xs]
    out = Tensor.from_op(data, (x,), "gather_cells")
    if out.needs_grad:
        def _backward() -> None:
            grad = np.zeros_like(x.data)
            np.add.at(grad, (batch, slice(None), ys, xs), out.grad)
            _push(x, grad)

        out._backward = _backward
    return out


def bce_loss(pred: Tensor, target: np.ndarray | Tensor) -> Tensor:
    """Mean binary cross-entropy; predictions are clamped to ``[ε, 1 − ε]``."""
    t = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=pred.data.dtype)
    if t.shape != pred.shape:
        raise ShapeError("bce target does not match prediction", expected=pred.shape, actual=t.shape)
    p = np.clip(pred.data, BCE_EPSILON, 1 - BCE_EPSILON)
    losses = -(t * np.log(p) + (1 - t) * np.log(1 - p))
    out = Tensor.from_op(np.array(losses.mean(), dtype=pred.data.dtype), (pred,), "bce_loss")
    if out.needs_grad:
        def _backward() -> None:
            inside = (pred.data > BCE_EPSILON) & (pred.data < 1 - BCE_EPSILON)
            grad = (-t / p + (1 - t) / (1 - p)) * inside / t.size
            _push(pred, out.grad * grad)

        out._backward = _backward
    return out


def cross_entropy_loss(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy of ``[N, A]`` logits against integer labels."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError("cross-entropy labels", expected=(logits.shape[0],), actual=labels.shape)
    if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise DomainError("label out of range", classes=logits.shape[1])
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(labels.size)
    losses = log_norm - shifted[rows, labels]
    out = Tensor.from_op(np.array(losses.mean(), dtype=logits.data.dtype), (logits,), "cross_entropy")
    if out.needs_grad:
        def _backward() -> None:
            grad = softmax_array(logits.data, axis=1)
            grad[rows, labels] -= 1
            _push(logits, out.grad * grad / labels.size)

        out._backward = _backward
    return out
