"""Raw grid -> normalized SolarImage, plus automated quality screening."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..errors import InvalidSize, MissingHeaderKey, NonFiniteResult
from .fits_io import observed_at
from .types import (
    Instrument,
    NormalizationRecord,
    QualityVerdict,
    ScreenReason,
    ScreeningThresholds,
    SolarImage,
    _is_power_of_two,
)

# fraction of non-finite raw pixels above which preprocessing refuses to
# proceed at all; screening flags anything above its own (stricter) threshold
HARD_NAN_BOUND = 0.5

SATURATION_EPS = 1e-6
DISK_MASK_FLOOR = 1e-3
MIN_SUBJECT_FRACTION = 0.05


def instrument_from_header(header: dict) -> Instrument:
    text = " ".join(str(header.get(k, "")) for k in ("INSTRUME", "TELESCOP")).upper()
    if "HMI" in text:
        return Instrument.HMI
    if "AIA" in text:
        return Instrument.AIA0304
    raise MissingHeaderKey("cannot identify instrument from INSTRUME/TELESCOP")


def _area_resample(grid: np.ndarray, target_size: int) -> np.ndarray:
    h, w = grid.shape
    if (h, w) == (target_size, target_size):
        return grid
    if h % target_size == 0 and w % target_size == 0:
        # exact integer downscale: plain block mean
        fh, fw = h // target_size, w // target_size
        return grid.reshape(target_size, fh, target_size, fw).mean(axis=(1, 3))
    import cv2

    return cv2.resize(grid.astype(np.float32), (target_size, target_size),
                      interpolation=cv2.INTER_AREA).astype(grid.dtype)


def preprocess(
    raw: np.ndarray,
    header: dict,
    target_size: int,
    norm: NormalizationRecord,
    instrument: Instrument | None = None,
    source_path: str | None = None,
) -> SolarImage:
    """Center the disk, take out the roll angle, resample, normalize.

    The disk center is translated to the grid center (CRPIX1/CRPIX2, FITS
    1-indexed), the roll angle (CROTA2, degrees) is rotated out so solar
    north points up, the grid is resampled to target_size x target_size by
    area-weighted interpolation, and values are clipped to the instrument
    range in `norm` and affinely mapped to [-1, 1], replicated to 3 channels.
    """
    if not _is_power_of_two(target_size):
        raise InvalidSize(f"target_size must be a power of two, got {target_size}")
    if instrument is None:
        instrument = instrument_from_header(header)
    timestamp = observed_at(header)

    grid = np.asarray(raw, dtype=np.float64)
    finite = np.isfinite(grid)
    nan_fraction = float(1.0 - finite.mean())
    if nan_fraction > HARD_NAN_BOUND:
        raise NonFiniteResult(
            f"{nan_fraction:.1%} of raw pixels are non-finite (bound {HARD_NAN_BOUND:.0%})")
    if nan_fraction > 0.0:
        grid = np.where(finite, grid, 0.0)

    if "CRPIX1" not in header or "CRPIX2" not in header:
        raise MissingHeaderKey("CRPIX1/CRPIX2 (disk center) required")
    h, w = grid.shape
    # FITS CRPIX is 1-indexed; move the disk center onto the grid center
    dy = (h - 1) / 2.0 - (float(header["CRPIX2"]) - 1.0)
    dx = (w - 1) / 2.0 - (float(header["CRPIX1"]) - 1.0)
    if dy != 0.0 or dx != 0.0:
        grid = ndimage.shift(grid, (dy, dx), order=1, mode="constant", cval=0.0)

    roll = float(header.get("CROTA2", 0.0)) % 360.0
    if roll != 0.0:
        grid = ndimage.rotate(grid, -roll, reshape=False, order=1,
                              mode="constant", cval=0.0)

    grid = _area_resample(grid, target_size)
    channel = norm.normalize(grid, instrument)
    pixels = np.repeat(channel[np.newaxis], 3, axis=0)
    return SolarImage(
        pixels=pixels,
        timestamp=timestamp,
        instrument=instrument,
        source_path=source_path,
        preclip_nan_fraction=nan_fraction,
    )


def quality_screen(
    img: SolarImage, thresholds: ScreeningThresholds | None = None
) -> QualityVerdict:
    """Flag images the paper would have discarded by hand.

    All thresholds are strict inequalities: a fraction exactly at the bound
    passes. Never raises on a valid SolarImage.
    """
    t = thresholds or ScreeningThresholds()
    reasons: list[ScreenReason] = []
    channel = img.pixels[0]

    if img.preclip_nan_fraction > t.max_nan_fraction:
        reasons.append(ScreenReason.NAN_FRACTION)

    saturated = float((channel >= 1.0 - SATURATION_EPS).mean())
    if saturated > t.max_saturated_fraction:
        reasons.append(ScreenReason.SATURATION)

    # disk-edge misalignment: centroid of the above-floor support vs grid center
    mask = channel > (-1.0 + DISK_MASK_FLOOR)
    if mask.mean() >= MIN_SUBJECT_FRACTION:
        rows, cols = np.nonzero(mask)
        center = (img.side - 1) / 2.0
        offset = float(np.hypot(rows.mean() - center, cols.mean() - center))
        if offset > t.max_misalignment_frac * img.side:
            reasons.append(ScreenReason.OFF_DISK_MISALIGNMENT)

    return QualityVerdict(accepted=not reasons, reasons=reasons)
