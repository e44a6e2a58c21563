"""SGD and Adam over a ``ParamSet``; gradients are cleared after every step."""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from core.exceptions import AutodiffStateError, ConfigurationError

from .params import ParamSet


class OptimizerKind(str, Enum):
    ADAM = "adam"
    SGD = "sgd"


@dataclass(frozen=True)
class OptimizerConfig:
    kind: OptimizerKind = OptimizerKind.ADAM
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", OptimizerKind(self.kind))
        if self.learning_rate <= 0:
            raise ConfigurationError(f"Learning rate must be positive, got {self.learning_rate}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigurationError("Adam betas must be in [0, 1)")


class Optimizer:
    def __init__(self, params: ParamSet, config: OptimizerConfig) -> None:
        self.params = params
        self.config = config
        self.steps = 0

    def _collect(self) -> list[tuple[str, np.ndarray]]:
        grads = [(name, t.grad) for name, t in self.params.items() if t.grad is not None]
        if not grads:
            raise AutodiffStateError("Optimizer step without gradients; call backward() first")
        return grads  # type: ignore[return-value]

    def step(self) -> None:
        raise NotImplementedError

    def state(self) -> dict[str, np.ndarray]:
        """Optimizer state as named arrays, checkpointable alongside the model."""
        return {"step": np.array([self.steps], dtype=np.float64)}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        self.steps = int(state["step"][0])


class SGD(Optimizer):
    def step(self) -> None:
        lr = self.config.learning_rate
        for name, grad in self._collect():
            tensor = self.params[name]
            tensor.data = tensor.data - (lr * grad).astype(tensor.data.dtype)
        self.steps += 1
        self.params.zero_grad()


class Adam(Optimizer):
    def __init__(self, params: ParamSet, config: OptimizerConfig) -> None:
        super().__init__(params, config)
        self.first: dict[str, np.ndarray] = {}
        self.second: dict[str, np.ndarray] = {}

    def step(self) -> None:
        c = self.config
        grads = self._collect()
        self.steps += 1
        correction1 = 1 - c.beta1**self.steps
        correction2 = 1 - c.beta2**self.steps
        for name, grad in grads:
            tensor = self.params[name]
            m = self.first.get(name, np.zeros_like(tensor.data))
            v = self.second.get(name, np.zeros_like(tensor.data))
            m = c.beta1 * m + (1 - c.beta1) * grad
            v = c.beta2 * v + (1 - c.beta2) * grad * grad
            self.first[name], self.second[name] = m, v
            update = c.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + c.epsilon)
            tensor.data = tensor.data - update.astype(tensor.data.dtype)
        self.params.zero_grad()

    def state(self) -> dict[str, np.ndarray]:
        state = super().state()
        for name, m in self.first.items():
            state[f"adam.m.{name}"] = m
            state[f"adam.v.{name}"] = self.second[name]
        return state

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        super().load_state(state)
        for name, tensor in self.params.items():
            if f"adam.m.{name}" in state:
                self.first[name] = state[f"adam.m.{name}"].astype(tensor.data.dtype)
                self.second[name] = state[f"adam.v.{name}"].astype(tensor.data.dtype)


def build_optimizer(params: ParamSet, config: OptimizerConfig) -> Optimizer:
    if config.kind is OptimizerKind.SGD:
        return SGD(params, config)
    return Adam(params, config)
