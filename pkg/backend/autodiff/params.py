"""Named parameter collections and their initializers."""

from collections.abc import Iterator, Mapping

import numpy as np

from core.exceptions import ConfigurationError, ShapeError

from .tensor import Tensor, default_dtype


def kaiming_uniform(shape: tuple[int, ...], fan_in: int, rng: np.random.Generator) -> np.ndarray:
    """He-uniform initialization for ReLU layers: ``U(-b, b)``, ``b = sqrt(6 / fan_in)``."""
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class ParamSet(Mapping[str, Tensor]):
    """
    Ordered mapping of unique dotted names (``mm.encoder.conv1.weight``) to
    trainable tensors.
    """

    def __init__(self) -> None:
        self._params: dict[str, Tensor] = {}

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise ConfigurationError(f"Duplicate parameter name {name!r}")
        tensor = Tensor(value, requires_grad=True, name=name)
        self._params[name] = tensor
        return tensor

    def add_dense(self, prefix: str, fan_in: int, fan_out: int, rng: np.random.Generator, bias: bool = True) -> None:
        self.add(f"{prefix}.weight", kaiming_uniform((fan_out, fan_in), fan_in, rng))
        if bias:
            self.add(f"{prefix}.bias", np.zeros(fan_out))

    def add_conv(
        self,
        prefix: str,
        in_channels: int,
        out_channels: int,
        kernel: int,
        rng: np.random.Generator,
        bias: bool = True,
    ) -> None:
        fan_in = in_channels * kernel * kernel
        self.add(f"{prefix}.weight", kaiming_uniform((out_channels, in_channels, kernel, kernel), fan_in, rng))
        if bias:
            self.add(f"{prefix}.bias", np.zeros(out_channels))

    def get_optional(self, name: str) -> Tensor | None:
        return self._params.get(name)

    def assign(self, name: str, value: np.ndarray) -> None:
        """Overwrite a parameter's values in place; the shape must not change."""
        tensor = self._params[name]
        value = np.asarray(value)
        if value.shape != tensor.shape:
            raise ShapeError(f"Cannot assign {name}", expected=tensor.shape, actual=value.shape)
        tensor.data = value.astype(tensor.data.dtype)

    def with_prefix(self, prefix: str) -> "ParamSet":
        subset = ParamSet()
        for name, tensor in self._params.items():
            if name.startswith(prefix):
                subset._params[name] = tensor
        return subset

    def merged(self, other: "ParamSet") -> "ParamSet":
        combined = ParamSet()
        for source in (self, other):
            for name, tensor in source._params.items():
                if name in combined._params:
                    raise ConfigurationError(f"Duplicate parameter name {name!r}")
                combined._params[name] = tensor
        return combined

    def zero_grad(self) -> None:
        for tensor in self._params.values():
            tensor.grad = None

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: tensor.data.copy() for name, tensor in self._params.items()}

    def cast(self, dtype: np.dtype | None = None) -> None:
        """Convert every parameter to ``dtype`` (default: the working dtype)."""
        target = dtype or default_dtype()
        for tensor in self._params.values():
            tensor.data = tensor.data.astype(target)

    def count(self) -> int:
        return int(sum(tensor.data.size for tensor in self._params.values()))

    def grad_norm(self) -> float:
        total = sum(float(np.sum(t.grad.astype(np.float64) ** 2)) for t in self._params.values() if t.grad is not None)
        return float(np.sqrt(total))
