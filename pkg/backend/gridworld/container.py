"""
Binary dataset container.

Every record starts with a 16-byte little-endian header::

    magic "D2MN" | u16 version | u16 X | u16 Y | u8 kind | 5 zero bytes

followed by a kind-specific payload. Occupancy is bit-packed row-major
(``ceil(X*Y/8)`` bytes); positions are ``u16 x, u16 y`` pairs. A dataset
directory holds ``episodes.bin``, ``labels.bin`` and a ``manifest.json``.
"""

import json
import struct
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Any, BinaryIO

import numpy as np

from core.exceptions import DatasetError

from .types import CellPos, OccupancyGrid

MAGIC = b"D2MN"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sHHHB5x")
HEADER_SIZE = HEADER.size

EPISODES_FILE = "episodes.bin"
LABELS_FILE = "labels.bin"
MANIFEST_FILE = "manifest.json"

TEST_SPLIT_MODULUS = 6


class RecordKind(IntEnum):
    MAP = 1
    EPISODE = 2
    LABELED_SAMPLE = 3


@dataclass(frozen=True, eq=False)
class MapRecord:
    grid: OccupancyGrid


@dataclass(frozen=True, eq=False)
class EpisodeRecord:
    grid: OccupancyGrid
    starts: tuple[CellPos, ...]
    goal_lists: tuple[tuple[CellPos, ...], ...]


@dataclass(frozen=True, eq=False)
class LabeledSample:
    """One imitation example: map, position, goal and the mask of optimal actions."""

    grid: OccupancyGrid
    pos: CellPos
    goal: CellPos
    action_mask: int

    @property
    def canonical_action(self) -> int:
        """Lowest-index optimal action."""
        return (self.action_mask & -self.action_mask).bit_length() - 1


Record = MapRecord | EpisodeRecord | LabeledSample


def is_test_index(index: int) -> bool:
    """Deterministic 5:1 train/test split by record index."""
    return index % TEST_SPLIT_MODULUS == TEST_SPLIT_MODULUS - 1


def _pack_grid(grid: OccupancyGrid) -> bytes:
    return np.packbits(grid.cells.reshape(-1)).tobytes()


def _unpack_grid(payload: bytes, width: int, height: int) -> OccupancyGrid:
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), count=width * height)
    return OccupancyGrid(bits.reshape(height, width))


def _grid_bytes(width: int, height: int) -> int:
    return (width * height + 7) // 8


def _pack_positions(positions: Sequence[CellPos]) -> bytes:
    return np.array([(p.x, p.y) for p in positions], dtype="<u2").reshape(-1).tobytes()


def _unpack_positions(payload: bytes) -> tuple[CellPos, ...]:
    flat = np.frombuffer(payload, dtype="<u2").reshape(-1, 2)
    return tuple(CellPos(int(x), int(y)) for x, y in flat)


def encode_record(record: Record) -> bytes:
    """Serialize one record, header included."""
    grid = record.grid
    if isinstance(record, MapRecord):
        kind, payload = RecordKind.MAP, b""
    elif isinstance(record, EpisodeRecord):
        goals_per_robot = len(record.goal_lists[0])
        if any(len(goals) != goals_per_robot for goals in record.goal_lists):
            raise DatasetError("All robots of an episode record need the same number of goals")
        flat_goals = [goal for goals in record.goal_lists for goal in goals]
        kind = RecordKind.EPISODE
        payload = (
            struct.pack("<HH", len(record.starts), goals_per_robot)
            + _pack_positions(record.starts)
            + _pack_positions(flat_goals)
        )
    else:
        kind = RecordKind.LABELED_SAMPLE
        payload = _pack_positions((record.pos, record.goal)) + struct.pack("<B", record.action_mask)
    header = HEADER.pack(MAGIC, FORMAT_VERSION, grid.width, grid.height, kind)
    return header + _pack_grid(grid) + payload


def _read_exact(stream: BinaryIO, size: int, what: str, path: Path | None) -> bytes:
    data = stream.read(size)
    if len(data) != size:
        raise DatasetError(f"Truncated record: expected {size} bytes of {what}, got {len(data)}", path)
    return data


def read_records(stream: BinaryIO, path: Path | None = None) -> Iterator[Record]:
    """Decode records until end of stream, validating every header."""
    while True:
        raw = stream.read(HEADER_SIZE)
        if not raw:
            return
        if len(raw) != HEADER_SIZE:
            raise DatasetError(f"Truncated header ({len(raw)} bytes)", path)
        magic, version, width, height, kind = HEADER.unpack(raw)
        if magic != MAGIC:
            raise DatasetError(f"Bad magic {magic!r}", path)
        if version != FORMAT_VERSION:
            raise DatasetError(f"Unsupported container version {version}", path)
        try:
            kind = RecordKind(kind)
        except ValueError as exc:
            raise DatasetError(f"Unknown record kind {kind}", path) from exc

        grid = _unpack_grid(
            _read_exact(stream, _grid_bytes(width, height), "occupancy", path), width, height
        )
        if kind is RecordKind.MAP:
            yield MapRecord(grid)
        elif kind is RecordKind.EPISODE:
            n_robots, goals_per_robot = struct.unpack("<HH", _read_exact(stream, 4, "episode counts", path))
            starts = _unpack_positions(_read_exact(stream, 4 * n_robots, "starts", path))
            goals = _unpack_positions(
                _read_exact(stream, 4 * n_robots * goals_per_robot, "goals", path)
            )
            goal_lists = tuple(
                goals[i * goals_per_robot:(i + 1) * goals_per_robot] for i in range(n_robots)
            )
            yield EpisodeRecord(grid, starts, goal_lists)
        else:
            pos, goal = _unpack_positions(_read_exact(stream, 8, "positions", path))
            (mask,) = struct.unpack("<B", _read_exact(stream, 1, "action mask", path))
            yield LabeledSample(grid, pos, goal, mask)


def read_record_file(path: Path) -> list[Record]:
    try:
        with path.open("rb") as stream:
            return list(read_records(stream, path))
    except FileNotFoundError as exc:
        raise DatasetError("Dataset file not found", path) from exc


def write_records(path: Path, records: Sequence[Record]) -> int:
    """Write records to ``path``; returns the number of bytes written."""
    path.parent.mkdir(parents=True, exist_ok=True)
    written = 0
    with path.open("wb") as stream:
        for record in records:
            written += stream.write(encode_record(record))
    return written


def write_manifest(directory: Path, manifest: dict[str, Any]) -> Path:
    path = directory / MANIFEST_FILE
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(directory: Path) -> dict[str, Any]:
    path = directory / MANIFEST_FILE
    try:
        return json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise DatasetError("Dataset manifest not found", path) from exc
    except json.JSONDecodeError as exc:
        raise DatasetError(f"Malformed manifest: {exc}", path) from exc


@dataclass(frozen=True)
class Dataset:
    """A loaded dataset directory split into train and test partitions."""

    manifest: dict[str, Any]
    episodes: tuple[EpisodeRecord, ...]
    labels: tuple[LabeledSample, ...]

    @classmethod
    def load(cls, directory: Path) -> "Dataset":
        manifest = read_manifest(directory)
        files = manifest.get("files", {})
        episodes = read_record_file(directory / files.get("episodes", EPISODES_FILE))
        labels = read_record_file(directory / files.get("labels", LABELS_FILE))
        if not all(isinstance(r, EpisodeRecord) for r in episodes):
            raise DatasetError("Episode file holds non-episode records", directory)
        if not all(isinstance(r, LabeledSample) for r in labels):
            raise DatasetError("Label file holds non-label records", directory)
        return cls(manifest, tuple(episodes), tuple(labels))  # type: ignore[arg-type]

    def episode_split(self, test: bool) -> list[EpisodeRecord]:
        return [r for i, r in enumerate(self.episodes) if is_test_index(i) == test]

    def label_split(self, test: bool) -> list[LabeledSample]:
        """Labels follow the split of the map they were generated from."""
        per_map = int(self.manifest.get("labels_per_map", 0)) or 1
        return [r for i, r in enumerate(self.labels) if is_test_index(i // per_map) == test]
