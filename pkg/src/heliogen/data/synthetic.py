"""Deterministic synthetic paired dataset for desk-scale runs.

The GAUSSIAN_BLOBS task draws a signed random blob field as the input
(magnetogram stand-in) and derives the target (EUV stand-in) through a
fixed nonlinear map plus blur, so every target is an exact, recomputable
function of its input.
"""
from __future__ import annotations

import enum
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from ..errors import InvalidSize
from .cache import write_raw_cache
from .manifest import DatasetManifest, ManifestEntry
from .types import (
    DEFAULT_SYNTHETIC_IN_CLIP,
    DEFAULT_SYNTHETIC_OUT_CLIP,
    Instrument,
    NormalizationRecord,
    _is_power_of_two,
)


class SyntheticTask(enum.Enum):
    GAUSSIAN_BLOBS = "gaussian_blobs"


EPOCH_START = datetime(2012, 1, 1, tzinfo=timezone.utc)
CADENCE = timedelta(hours=1)

TARGET_GAMMA = 0.75
TARGET_BLUR_SIGMA = 1.5
# faint background glow keeps targets strictly inside (-1, 1)
TARGET_FLOOR = 0.005


def synthetic_input_field(size: int, rng: np.random.Generator) -> np.ndarray:
    """Random signed Gaussian blob field squashed into (-1, 1)."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    field = np.zeros((size, size), dtype=np.float64)
    for _ in range(int(rng.integers(4, 11))):
        cy, cx = rng.uniform(0, size, size=2)
        sigma = rng.uniform(size / 16.0, size / 6.0)
        amp = rng.choice((-1.0, 1.0)) * rng.uniform(0.6, 1.4)
        field += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * sigma**2))
    return np.tanh(field).astype(np.float32)


def synthetic_target_from_input(channel: np.ndarray) -> np.ndarray:
    """The fixed transform the models are asked to learn.

    Unsigned-magnitude gamma map followed by a Gaussian blur, lifted onto a
    faint background floor and rescaled into (-1, 1). Strictly inside the
    open interval, so targets never read as saturated or empty.
    """
    magnitude = np.abs(channel.astype(np.float64)) ** TARGET_GAMMA
    blurred = gaussian_filter(magnitude, sigma=TARGET_BLUR_SIGMA)
    intensity = TARGET_FLOOR + (1.0 - TARGET_FLOOR) * blurred
    return (2.0 * intensity - 1.0).astype(np.float32)


def make_synthetic_dataset(
    out_dir: str | Path,
    n: int,
    size: int,
    seed: int,
    task: SyntheticTask = SyntheticTask.GAUSSIAN_BLOBS,
    n_test: int = 0,
) -> DatasetManifest:
    """Generate n image pairs under out_dir and write their manifest.

    Pairs are hour-cadenced starting 2012-01-01; the last n_test pairs are
    tagged test. Bit-identical for identical arguments.
    """
    if not _is_power_of_two(size) or size < 16:
        raise InvalidSize(f"size must be a power of two >= 16, got {size}")
    if not isinstance(task, SyntheticTask):
        task = SyntheticTask(task)
    if n < 1 or not 0 <= n_test < n:
        raise ValueError(f"need n >= 1 and 0 <= n_test < n, got n={n} n_test={n_test}")

    out_dir = Path(out_dir)
    image_dir = out_dir / "images"
    image_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    entries = []
    for i in range(n):
        channel = synthetic_input_field(size, rng)
        target = synthetic_target_from_input(channel)
        in_path = image_dir / f"pair_{i:05d}_in.raw"
        out_path = image_dir / f"pair_{i:05d}_out.raw"
        write_raw_cache(in_path, np.repeat(channel[np.newaxis], 3, axis=0))
        write_raw_cache(out_path, np.repeat(target[np.newaxis], 3, axis=0))
        entries.append(ManifestEntry(
            input_path=str(in_path),
            target_path=str(out_path),
            timestamp=EPOCH_START + i * CADENCE,
            split="test" if i >= n - n_test else "train",
        ))

    norm = NormalizationRecord()
    norm.set(Instrument.SYNTHETIC_IN, *DEFAULT_SYNTHETIC_IN_CLIP)
    norm.set(Instrument.SYNTHETIC_OUT, *DEFAULT_SYNTHETIC_OUT_CLIP)
    manifest = DatasetManifest(
        entries=entries,
        pairing_tolerance_s=0.0,
        normalization=norm,
        target_instrument=Instrument.SYNTHETIC_OUT,
    )
    manifest.write(out_dir / "manifest.tsv")
    return manifest
