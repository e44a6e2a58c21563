"""Memory-maintenance interfaces and the learned network's architecture descriptor."""

from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Protocol

import numpy as np

from core.exceptions import ConfigurationError


class AggregatorKind(str, Enum):
    OBSERVATION = "observation"
    MESSAGE = "message"


class EncoderKind(str, Enum):
    CONV = "conv"
    MLP = "mlp"


class MemoryModel(Protocol):
    """What a robot needs to maintain its belief embedding."""

    width: int
    height: int

    @property
    def embedding_size(self) -> int: ...

    @property
    def message_bits(self) -> int:
        """Payload size of one broadcast embedding."""
        ...

    def encode(self, grid: np.ndarray) -> np.ndarray: ...

    def decode(self, embedding: np.ndarray) -> np.ndarray: ...

    def aggregate(self, first: np.ndarray, second: np.ndarray, which: AggregatorKind) -> np.ndarray: ...

    def empty_embedding(self) -> np.ndarray: ...


@dataclass(frozen=True)
class MMArchitecture:
    width: int
    height: int
    embedding_size: int = 32
    encoder: EncoderKind = EncoderKind.CONV
    share_aggregators: bool = True
    mlp_hidden: int = 256
    conv_channels: tuple[int, int] = (8, 16)

    def __post_init__(self) -> None:
        object.__setattr__(self, "encoder", EncoderKind(self.encoder))
        object.__setattr__(self, "conv_channels", tuple(int(c) for c in self.conv_channels))
        if self.width < 1 or self.height < 1:
            raise ConfigurationError("Map dimensions must be positive", width=self.width, height=self.height)
        if self.embedding_size < 1:
            raise ConfigurationError(f"Embedding size must be >= 1, got {self.embedding_size}")
        if len(self.conv_channels) != 2 or min(self.conv_channels) < 1:
            raise ConfigurationError(f"Need two positive conv widths, got {self.conv_channels}")

    @property
    def padded_height(self) -> int:
        return -(-self.height // 4) * 4

    @property
    def padded_width(self) -> int:
        return -(-self.width // 4) * 4

    @property
    def bottleneck_shape(self) -> tuple[int, int, int]:
        return (self.conv_channels[1], self.padded_height // 4, self.padded_width // 4)

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["encoder"] = self.encoder.value
        data["conv_channels"] = list(self.conv_channels)
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MMArchitecture":
        return cls(**{**data, "conv_channels": tuple(data.get("conv_channels", (8, 16)))})
