"""
Checkpoint files: a JSON manifest plus a flat little-endian float32 blob.

``<stem>.json`` lists every array (name, shape, offset and count in floats) in
insertion order together with free-form metadata; ``<stem>.bin`` holds the
values back to back. Manifests are written with sorted keys and no
timestamps so identical parameters produce identical files.
"""

import json
import logging
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import numpy as np

from core.exceptions import CheckpointError

from .params import ParamSet

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "memnav-checkpoint"
CHECKPOINT_VERSION = 1
STORAGE_DTYPE = np.dtype("<f4")
MODEL_STEM = "model"
OPTIMIZER_STEM = "optimizer"


def write_arrays(
    directory: Path,
    stem: str,
    arrays: Mapping[str, np.ndarray],
    metadata: dict[str, Any] | None = None,
) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    blobs = []
    for name, array in arrays.items():
        values = np.ascontiguousarray(array, dtype=STORAGE_DTYPE)
        entries.append({"name": name, "shape": list(values.shape), "offset": offset, "count": int(values.size)})
        offset += int(values.size)
        blobs.append(values.tobytes())
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "dtype": "float32-le",
        "total": offset,
        "tensors": entries,
        "metadata": metadata or {},
    }
    (directory / f"{stem}.bin").write_bytes(b"".join(blobs))
    manifest_path = directory / f"{stem}.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path


def read_arrays(directory: Path, stem: str) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    manifest_path = directory / f"{stem}.json"
    blob_path = directory / f"{stem}.bin"
    try:
        manifest = json.loads(manifest_path.read_text())
        blob = blob_path.read_bytes()
    except FileNotFoundError as exc:
        raise CheckpointError(f"Checkpoint file missing: {exc.filename}", directory) from exc
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"Malformed checkpoint manifest: {exc}", manifest_path) from exc

    if manifest.get("format") != CHECKPOINT_FORMAT or manifest.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError("Unrecognized checkpoint format", manifest_path)
    values = np.frombuffer(blob, dtype=STORAGE_DTYPE)
    if values.size != manifest.get("total"):
        raise CheckpointError(
            f"Checkpoint blob holds {values.size} floats, manifest expects {manifest.get('total')}",
            blob_path,
        )
    arrays: dict[str, np.ndarray] = {}
    for entry in manifest["tensors"]:
        start, count = entry["offset"], entry["count"]
        shape = tuple(entry["shape"])
        if int(np.prod(shape, dtype=np.int64)) != count or start + count > values.size:
            raise CheckpointError(f"Inconsistent entry for {entry['name']}", manifest_path)
        arrays[entry["name"]] = values[start:start + count].reshape(shape).copy()
    return arrays, manifest.get("metadata", {})


def save_checkpoint(params: ParamSet, directory: Path, metadata: dict[str, Any] | None = None) -> Path:
    path = write_arrays(directory, MODEL_STEM, {name: t.data for name, t in params.items()}, metadata)
    logger.info(f"Saved {len(params)} tensors ({params.count()} values) to {directory}")
    return path


def load_checkpoint(directory: Path) -> tuple[ParamSet, dict[str, Any]]:
    arrays, metadata = read_arrays(directory, MODEL_STEM)
    params = ParamSet()
    for name, values in arrays.items():
        params.add(name, values)
    return params, metadata


def check_against(params: ParamSet, expected: ParamSet, directory: Path) -> None:
    """Loaded names and shapes must match a freshly built architecture."""
    for name, tensor in expected.items():
        if name not in params:
            raise CheckpointError(f"Checkpoint lacks parameter {name}", directory)
        if params[name].shape != tensor.shape:
            raise CheckpointError(
                f"Parameter {name} has shape {params[name].shape}, expected {tensor.shape}", directory
            )
    extra = set(params) - set(expected)
    if extra:
        raise CheckpointError(f"Unexpected parameters: {sorted(extra)}", directory)


TRAINING_STATE_FILE = "training_state.json"


def save_training_state(
    directory: Path,
    optimizer_state: Mapping[str, np.ndarray],
    epoch: int,
    rng: np.random.Generator,
) -> None:
    """Everything needed to resume a run: optimizer moments, epoch and RNG position."""
    write_arrays(directory, OPTIMIZER_STEM, optimizer_state)
    state = {"epoch": epoch, "rng": rng.bit_generator.state}
    (directory / TRAINING_STATE_FILE).write_text(json.dumps(state, indent=2, sort_keys=True) + "\n")


def load_training_state(directory: Path) -> tuple[dict[str, np.ndarray], int, dict[str, Any]]:
    """Optimizer state, number of completed epochs and the bit-generator state."""
    arrays, _ = read_arrays(directory, OPTIMIZER_STEM)
    path = directory / TRAINING_STATE_FILE
    try:
        state = json.loads(path.read_text())
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"Cannot read training state: {exc}", path) from exc
    return arrays, int(state["epoch"]), state["rng"]
