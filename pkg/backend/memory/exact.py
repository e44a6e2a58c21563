"""Exact memory: the embedding is the map itself and aggregation is a cell-wise OR."""

import numpy as np

from core.exceptions import ShapeError

from .types import AggregatorKind


class ExactMemory:
    """Lossless ``MemoryModel`` with ``X·Y``-bit messages, used by the oracle baseline."""

    def __init__(self, width: int, height: int) -> None:
        self.width = width
        self.height = height

    @property
    def embedding_size(self) -> int:
        return self.width * self.height

    @property
    def message_bits(self) -> int:
        return self.width * self.height

    def encode(self, grid: np.ndarray) -> np.ndarray:
        grid = np.asarray(grid)
        if grid.shape != (self.height, self.width):
            raise ShapeError("map", expected=(self.height, self.width), actual=grid.shape)
        return (grid.reshape(-1) >= 0.5).astype(np.float64)

    def decode(self, embedding: np.ndarray) -> np.ndarray:
        if embedding.shape != (self.embedding_size,):
            raise ShapeError("embedding", expected=(self.embedding_size,), actual=embedding.shape)
        return embedding.reshape(self.height, self.width).copy()

    def aggregate(self, first: np.ndarray, second: np.ndarray, which: AggregatorKind) -> np.ndarray:
        return np.maximum(first, second)

    def empty_embedding(self) -> np.ndarray:
        return np.zeros(self.embedding_size)
