"""
PGM/PPM export of maps, beliefs and confidence maps through Pillow.

Pixel (x, y) is cell (x, y); images are X×Y unless an integer ``scale`` is given.
"""

import csv
from pathlib import Path

import numpy as np
from PIL import Image

from .exceptions import ShapeError

FREE = 255
OCCUPIED = 0
FALSE_POSITIVE = (220, 40, 40)
FALSE_NEGATIVE = (40, 180, 40)


def _to_uint8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)


def grid_image(cells: np.ndarray) -> Image.Image:
    """White free cells, black obstacles."""
    return Image.fromarray(np.where(np.asarray(cells) >= 0.5, OCCUPIED, FREE).astype(np.uint8), mode="L")


def belief_image(belief: np.ndarray) -> Image.Image:
    """Occupancy probability as darkness."""
    return Image.fromarray(_to_uint8(255.0 * (1.0 - np.asarray(belief, dtype=np.float64))), mode="L")


def belief_error_image(belief: np.ndarray, truth: np.ndarray) -> Image.Image:
    """Thresholded belief with false positives in red and false negatives in green."""
    belief = np.asarray(belief)
    truth = np.asarray(truth)
    if belief.shape != truth.shape:
        raise ShapeError("belief", expected=truth.shape, actual=belief.shape)
    believed = belief >= 0.5
    actual = truth >= 0.5
    gray = np.where(believed, OCCUPIED, FREE).astype(np.uint8)
    rgb = np.stack([gray, gray, gray], axis=-1)
    rgb[believed & ~actual] = FALSE_POSITIVE
    rgb[~believed & actual] = FALSE_NEGATIVE
    return Image.fromarray(rgb, mode="RGB")


def scalar_image(values: np.ndarray, low: float | None = None, high: float | None = None) -> Image.Image:
    """Linear grayscale between ``low`` and ``high`` (the array's range by default)."""
    values = np.asarray(values, dtype=np.float64)
    low = float(values.min()) if low is None else low
    high = float(values.max()) if high is None else high
    span = high - low
    scaled = np.zeros_like(values) if span <= 0 else (values - low) / span
    return Image.fromarray(_to_uint8(255.0 * np.clip(scaled, 0.0, 1.0)), mode="L")


def confidence_image(confidence: np.ndarray, num_actions: int = 8) -> Image.Image:
    """Max action probability, from uniform (black) to certain (white)."""
    return scalar_image(confidence, 1.0 / num_actions, 1.0)


def save_pnm(image: Image.Image, path: Path, scale: int = 1) -> Path:
    """Binary PGM for grayscale, PPM for colour."""
    if scale > 1:
        image = image.resize((image.width * scale, image.height * scale), Image.Resampling.NEAREST)
    suffix = ".pgm" if image.mode == "L" else ".ppm"
    path = path.with_suffix(suffix)
    path.parent.mkdir(parents=True, exist_ok=True)
    image.save(path, format="PPM")
    return path


def write_matrix_csv(path: Path, values: np.ndarray) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as stream:
        writer = csv.writer(stream, lineterminator="\n")
        for row in np.asarray(values):
            writer.writerow([f"{v:.6g}" for v in row])
    return path
