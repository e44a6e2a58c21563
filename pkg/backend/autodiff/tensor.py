"""
A tape-based reverse-mode autodiff tensor over numpy arrays.

Each op creates an output ``Tensor`` holding its parents and a ``_backward``
closure that pushes ``out.grad`` into the parents. ``backward()`` walks the
graph in reverse topological order. Graphs are only recorded when gradients
are enabled and at least one input needs a gradient.
"""

from collections.abc import Callable, Iterator
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Any

import numpy as np
from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

from core.exceptions import AutodiffStateError, ConfigurationError

_grad_enabled: ContextVar[bool] = ContextVar("grad_enabled", default=True)
_dtype_override: ContextVar[np.dtype | None] = ContextVar("dtype_override", default=None)

SUPPORTED_DTYPES = ("float32", "float64")


def default_dtype() -> np.dtype:
    override = _dtype_override.get()
    if override is not None:
        return override
    try:
        name = getattr(settings, "MEMNAV_FLOAT_DTYPE", "float32")
    except ImproperlyConfigured:
        name = "float32"
    return np.dtype(name)


@contextmanager
def precision(dtype: str | np.dtype) -> Iterator[None]:
    """Temporarily switch the working float dtype (``float32`` or ``float64``)."""
    resolved = np.dtype(dtype)
    if resolved.name not in SUPPORTED_DTYPES:
        raise ConfigurationError(f"Unsupported float dtype {resolved.name}")
    token = _dtype_override.set(resolved)
    try:
        yield
    finally:
        _dtype_override.reset(token)


@contextmanager
def no_grad() -> Iterator[None]:
    """Run ops without recording a graph (inference)."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


def grad_enabled() -> bool:
    return _grad_enabled.get()


class Tensor:
    """An n-d float array with an optional gradient and recorded producer."""

    def __init__(self, data: Any, requires_grad: bool = False, name: str | None = None) -> None:
        self.data: np.ndarray = np.array(data, dtype=default_dtype())
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.needs_grad = requires_grad
        self.name = name
        self.op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[], None] | None = None

    @classmethod
    def from_op(
        cls,
        data: np.ndarray,
        parents: tuple["Tensor", ...],
        op: str,
    ) -> "Tensor":
        """Wrap an op result; the caller attaches ``_backward`` when ``out.needs_grad``."""
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.requires_grad = False
        out.name = None
        out.op = op
        out.needs_grad = grad_enabled() and any(p.needs_grad for p in parents)
        out._parents = parents if out.needs_grad else ()
        out._backward = None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return int(self.data.ndim)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def accumulate(self, grad: np.ndarray) -> None:
        if grad.shape != self.data.shape:
            grad = np.broadcast_to(grad, self.data.shape)
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype)
        else:
            self.grad = self.grad + grad

    def zero_grad(self) -> None:
        self.grad = None

    def _topological_order(self) -> list["Tensor"]:
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Accumulate d(self)/d(leaf) into every leaf that requires a gradient."""
        if not self.needs_grad:
            raise AutodiffStateError("backward() called on a tensor without a recorded graph")
        if grad is None:
            if self.data.size != 1:
                raise AutodiffStateError(
                    f"backward() on a non-scalar tensor of shape {self.shape} needs an explicit grad"
                )
            grad = np.ones_like(self.data)
        order = self._topological_order()
        for node in order:
            if node._backward is not None:
                node.grad = None
        self.accumulate(np.asarray(grad, dtype=self.data.dtype))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward()

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, op={self.op!r}{label})"

    # Arithmetic sugar delegates to autodiff.ops.
    def __add__(self, other: "Tensor") -> "Tensor":
        from . import ops

        return ops.add(self, other)

    def __mul__(self, factor: float) -> "Tensor":
        from . import ops

        return ops.scale(self, factor)

    __rmul__ = __mul__
