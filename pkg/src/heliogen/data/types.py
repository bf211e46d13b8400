"""Core data types: images, pairs, screening verdicts, normalization records."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np


class Instrument(enum.Enum):
    HMI = "HMI"
    AIA0304 = "AIA0304"
    SYNTHETIC_IN = "SYNTHETIC_IN"
    SYNTHETIC_OUT = "SYNTHETIC_OUT"


class ScreenReason(enum.Enum):
    NAN_FRACTION = "NAN_FRACTION"
    SATURATION = "SATURATION"
    OFF_DISK_MISALIGNMENT = "OFF_DISK_MISALIGNMENT"


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass
class SolarImage:
    """A preprocessed 3-channel raster in [-1, 1] plus acquisition metadata.

    pixels is channel-major (3, H, W) float32 with H == W a power of two.
    preclip_nan_fraction records how many raw pixels were non-finite before
    preprocessing filled them; screening reads it since the stored pixels
    are always finite.
    """

    pixels: np.ndarray
    timestamp: datetime
    instrument: Instrument
    source_path: str | None = None
    preclip_nan_fraction: float = 0.0

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[0] != 3:
            raise ValueError(f"pixels must be (3, H, W), got {self.pixels.shape}")
        _, h, w = self.pixels.shape
        if h != w or not _is_power_of_two(h):
            raise ValueError(f"image must be square power-of-two, got {h}x{w}")
        if self.timestamp.tzinfo is None:
            self.timestamp = self.timestamp.replace(tzinfo=timezone.utc)

    @property
    def side(self) -> int:
        return self.pixels.shape[1]


@dataclass
class ImagePair:
    """A time-aligned (input, target) pair; the unit of training and evaluation."""

    input: SolarImage
    target: SolarImage
    time_delta_s: float

    def __post_init__(self):
        if self.input.pixels.shape != self.target.pixels.shape:
            raise ValueError("input and target shapes differ")


@dataclass
class QualityVerdict:
    accepted: bool
    reasons: list[ScreenReason] = field(default_factory=list)

    def __post_init__(self):
        assert self.accepted == (len(self.reasons) == 0)


@dataclass
class ScreeningThresholds:
    """Automated stand-ins for manual quality curation. Strict inequalities."""

    max_nan_fraction: float = 0.0
    max_saturated_fraction: float = 0.05
    # disk-centroid offset budget as a fraction of the image side
    max_misalignment_frac: float = 1.0 / 16.0


@dataclass
class NormalizationRecord:
    """Per-instrument clip ranges; data, not code, so it travels with the manifest.

    Pixels are clipped to [lo, hi] then affinely mapped onto [-1, 1].
    """

    ranges: dict[Instrument, tuple[float, float]] = field(default_factory=dict)

    def set(self, instrument: Instrument, lo: float, hi: float) -> None:
        if not (hi > lo):
            raise ValueError(f"bad clip range for {instrument}: [{lo}, {hi}]")
        self.ranges[instrument] = (float(lo), float(hi))

    def clip_range(self, instrument: Instrument) -> tuple[float, float]:
        return self.ranges[instrument]

    def normalize(self, raw: np.ndarray, instrument: Instrument) -> np.ndarray:
        lo, hi = self.ranges[instrument]
        clipped = np.clip(raw, lo, hi)
        return (2.0 * (clipped - lo) / (hi - lo) - 1.0).astype(np.float32)

    def denormalize(self, pixels: np.ndarray, instrument: Instrument) -> np.ndarray:
        """Map [-1, 1] values back to the clipped physical range."""
        lo, hi = self.ranges[instrument]
        return (np.asarray(pixels, dtype=np.float64) + 1.0) * 0.5 * (hi - lo) + lo

    def dynamic_range(self, instrument: Instrument) -> float:
        lo, hi = self.ranges[instrument]
        return hi - lo


DEFAULT_HMI_CLIP = (-100.0, 100.0)
DEFAULT_SYNTHETIC_IN_CLIP = (-1.0, 1.0)
DEFAULT_SYNTHETIC_OUT_CLIP = (0.0, 1.0)
# hi for AIA0304 is computed from data (99.5th percentile of the training
# candidates); this is only the fallback when no data is available.
DEFAULT_AIA_CLIP = (0.0, 5000.0)
