"""
JSON-lines episode transcripts and their audits.

Record types, in file order per episode: ``episode`` (the instance, the true
grid included), one ``init`` per robot, ``step`` per (step, robot), ``leg``
per finished traversal and ``result`` per robot. Embeddings are stored as
SHA-256 digests of their raw bytes; beliefs optionally as gzip'd bit-packed
base64 at threshold 0.5.
"""

import base64
import gzip
import hashlib
import json
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, TextIO

import numpy as np

from core.exceptions import DomainError, TranscriptError
from gridworld.types import EpisodeConfig, OccupancyGrid

Record = dict[str, Any]


def digest(embedding: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(embedding).tobytes()).hexdigest()


def pack_belief(belief: np.ndarray) -> str:
    bits = np.packbits((belief >= 0.5).reshape(-1))
    return base64.b64encode(gzip.compress(bits.tobytes(), mtime=0)).decode("ascii")


def unpack_belief(payload: str, width: int, height: int) -> np.ndarray:
    bits = np.frombuffer(gzip.decompress(base64.b64decode(payload)), dtype=np.uint8)
    return np.unpackbits(bits, count=width * height).reshape(height, width)


def grid_rows(grid: OccupancyGrid) -> list[str]:
    return ["".join("#" if c else "." for c in row) for row in grid.cells]


def episode_record(
    cfg: EpisodeConfig,
    method: str,
    leg_lengths: list[tuple[int, ...]],
    cap_multiplier: int,
    message_bits: int,
    episode: int = 0,
) -> Record:
    return {
        "type": "episode",
        "episode": episode,
        "method": method,
        "width": cfg.grid.width,
        "height": cfg.grid.height,
        "grid": grid_rows(cfg.grid),
        "half_width": cfg.half_width,
        "comm_range": cfg.comm_range,
        "noise": cfg.noise,
        "seed": cfg.rng_seed,
        "cap_multiplier": cap_multiplier,
        "message_bits": message_bits,
        "robots": [
            {
                "id": i,
                "start": list(start),
                "goals": [list(g) for g in goals],
                "leg_lengths": list(lengths),
            }
            for i, (start, goals, lengths) in enumerate(zip(cfg.starts, cfg.goal_lists, leg_lengths, strict=True))
        ],
    }


class TranscriptWriter:
    """Appends records as sorted-key JSON lines."""

    def __init__(self, stream: TextIO) -> None:
        self.stream = stream

    def write(self, record: Record) -> None:
        self.stream.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")

    def write_all(self, records: Iterable[Record]) -> None:
        for record in records:
            self.write(record)


def read_transcript(path: Path) -> Iterator[Record]:
    try:
        with path.open(encoding="utf-8") as stream:
            for number, line in enumerate(stream, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise TranscriptError(f"Malformed JSON: {exc}", line=number) from exc
                if "type" not in record:
                    raise TranscriptError("Record without a type", line=number)
                yield record
    except FileNotFoundError as exc:
        raise TranscriptError(f"Transcript not found: {path}") from exc


def split_episodes(records: Iterable[Record]) -> list[list[Record]]:
    episodes: list[list[Record]] = []
    for record in records:
        if record["type"] == "episode":
            episodes.append([record])
        elif not episodes:
            raise TranscriptError(f"{record['type']} record before any episode header")
        else:
            episodes[-1].append(record)
    return episodes


@dataclass
class CausalityReport:
    messages: int = 0
    violations: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def audit_causality(records: Iterable[Record]) -> CausalityReport:
    """
    Every received message must equal the sender's most recent embedding from
    an earlier step (its initial embedding before its first step).
    """
    report = CausalityReport()
    for episode in split_episodes(records):
        latest: dict[int, tuple[int, str]] = {}
        by_step: dict[int, list[Record]] = {}
        for record in episode:
            if record["type"] == "init":
                latest[record["robot"]] = (-1, record["embedding_sha"])
            elif record["type"] == "step":
                by_step.setdefault(record["t"], []).append(record)
        for t in sorted(by_step):
            for record in by_step[t]:
                for message in record["messages"]:
                    sender = message["from"]
                    report.messages += 1
                    if sender not in latest:
                        report.violations.append(f"t={t}: message from unknown robot {sender}")
                    elif latest[sender][1] != message["sha"]:
                        report.violations.append(
                            f"t={t}: robot {record['robot']} got a message from {sender} that is not "
                            f"its step-{latest[sender][0]} embedding"
                        )
                    elif latest[sender][0] >= t:
                        report.violations.append(f"t={t}: message from {sender} is not from an earlier step")
            # publish only after the whole step has been checked
            for record in by_step[t]:
                latest[record["robot"]] = (t, record["embedding_out_sha"])
    return report


def metrics_from_transcript(records: Iterable[Record]) -> tuple[float, float]:
    """ASA (percent) and SPL recomputed from step and leg records alone."""
    correct = total = 0
    spl_terms = []
    for record in records:
        if record["type"] == "step":
            total += 1
            correct += (record["optimal_mask"] >> record["action"]) & 1
        elif record["type"] == "leg":
            length, steps = record["optimal_length"], record["steps"]
            spl_terms.append(float(record["success"]) * (length / max(steps, length) if max(steps, length) else 1.0))
    if total == 0:
        raise DomainError("Transcript holds no steps")
    if not spl_terms:
        raise DomainError("Transcript holds no legs")
    return 100.0 * correct / total, float(np.mean(spl_terms))


def episode_grid(header: Record) -> OccupancyGrid:
    return OccupancyGrid.from_rows(header["grid"])
