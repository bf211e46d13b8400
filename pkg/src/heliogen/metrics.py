"""Evaluation metrics: relative error, Pearson correlation, PPE10, SSIM.

All four operate on single-channel intensity-domain images (non-negative
physical values). Dataset evaluation maps model output from [-1, 1] back
through the manifest's normalization record before scoring, since total-
flux ratios are meaningless on signed data.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve2d

from .data.cache import read_raw_cache
from .data.manifest import DatasetManifest
from .errors import ConstantImage, ImageTooSmall, ShapeMismatch, ZeroDenominator


def luminance(pixels: np.ndarray) -> np.ndarray:
    """Reduce (3, H, W) pixels to one channel by averaging.

    Pipeline images carry three identical channels, so this is exact for
    real data and a fair reduction for generated output.
    """
    arr = np.asarray(pixels, dtype=np.float64)
    if arr.ndim == 3:
        return arr.mean(axis=0)
    if arr.ndim == 2:
        return arr
    raise ShapeMismatch(f"expected (3, H, W) or (H, W), got {arr.shape}")


def _check_same_shape(generated: np.ndarray, real: np.ndarray) -> None:
    if generated.shape != real.shape:
        raise ShapeMismatch(f"{generated.shape} vs {real.shape}")


def relative_error(generated: np.ndarray, real: np.ndarray,
                   absolute: bool = False) -> float:
    """Signed relative error of the total pixel value, (sum_g - sum_r)/sum_r.

    Negative means the generator underestimates total intensity.
    absolute=True returns |sum_g - sum_r|/sum_r instead.
    """
    _check_same_shape(generated, real)
    phi_real = float(np.sum(real, dtype=np.float64))
    if phi_real == 0.0:
        raise ZeroDenominator("real image sums to zero")
    diff = float(np.sum(generated, dtype=np.float64)) - phi_real
    if absolute:
        diff = abs(diff)
    return diff / phi_real


def pearson_cc(generated: np.ndarray, real: np.ndarray) -> float:
    """Pearson correlation over flattened co-indexed pixels."""
    _check_same_shape(generated, real)
    a = np.asarray(generated, dtype=np.float64).ravel()
    b = np.asarray(real, dtype=np.float64).ravel()
    da, db = a - a.mean(), b - b.mean()
    va, vb = float(np.dot(da, da)), float(np.dot(db, db))
    if va == 0.0 or vb == 0.0:
        raise ConstantImage("zero variance image in correlation")
    return float(np.dot(da, db)) / math.sqrt(va * vb)


def ppe10(generated: np.ndarray, real: np.ndarray, threshold: float = 0.10,
          dynamic_range: float = 1.0) -> float:
    """Fraction of pixels whose relative error is strictly below threshold."""
    _check_same_shape(generated, real)
    g = np.asarray(generated, dtype=np.float64)
    r = np.asarray(real, dtype=np.float64)
    eps = 1e-6 * dynamic_range
    rel = np.abs(g - r) / np.maximum(np.abs(r), eps)
    return float((rel < threshold).mean())


@dataclass(frozen=True)
class SsimParams:
    window_size: int = 11
    window_sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0

    def __post_init__(self):
        if self.window_size % 2 != 1 or self.window_size < 1:
            raise ValueError(f"window_size must be odd, got {self.window_size}")
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("k1 and k2 must be > 0")
        if self.window_sigma <= 0 or self.dynamic_range <= 0:
            raise ValueError("window_sigma and dynamic_range must be > 0")


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    window = np.outer(g, g)
    return window / window.sum()


def ssim(generated: np.ndarray, real: np.ndarray, p: SsimParams | None = None) -> float:
    """Mean structural similarity over all fully-valid window positions.

    Gaussian-weighted local means/variances/covariance with the usual
    (k1*L)^2 and (k2*L)^2 stabilizers; single-channel.
    """
    p = p or SsimParams()
    _check_same_shape(generated, real)
    a = np.asarray(generated, dtype=np.float64)
    b = np.asarray(real, dtype=np.float64)
    if min(a.shape) < p.window_size:
        raise ImageTooSmall(f"image {a.shape} smaller than window {p.window_size}")

    w = _gaussian_window(p.window_size, p.window_sigma)
    mu_a = convolve2d(a, w, mode="valid")
    mu_b = convolve2d(b, w, mode="valid")
    var_a = convolve2d(a * a, w, mode="valid") - mu_a**2
    var_b = convolve2d(b * b, w, mode="valid") - mu_b**2
    cov = convolve2d(a * b, w, mode="valid") - mu_a * mu_b

    c1 = (p.k1 * p.dynamic_range) ** 2
    c2 = (p.k2 * p.dynamic_range) ** 2
    ssim_map = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2))
    return float(ssim_map.mean())


@dataclass
class ImageMetrics:
    pair_id: str
    re_signed: float
    pcc: float
    ppe10: float
    ssim: float


@dataclass
class MetricsReport:
    per_image: list[ImageMetrics]
    params: dict = field(default_factory=dict)

    @property
    def n_images(self) -> int:
        return len(self.per_image)

    def aggregate(self) -> dict[str, float]:
        cols = {
            "re_signed": [m.re_signed for m in self.per_image],
            "pcc": [m.pcc for m in self.per_image],
            "ppe10": [m.ppe10 for m in self.per_image],
            "ssim": [m.ssim for m in self.per_image],
        }
        return {k: float(np.mean(v)) for k, v in cols.items()}

    def write_csv(self, path) -> None:
        agg = self.aggregate()
        lines = ["# " + " ".join(f"{k}={v}" for k, v in sorted(self.params.items()))]
        lines.append("pair_id,re_signed,pcc,ppe10,ssim")
        for m in self.per_image:
            lines.append(f"{m.pair_id},{m.re_signed:.10g},{m.pcc:.10g},"
                         f"{m.ppe10:.10g},{m.ssim:.10g}")
        lines.append(f"MEAN,{agg['re_signed']:.10g},{agg['pcc']:.10g},"
                     f"{agg['ppe10']:.10g},{agg['ssim']:.10g}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def evaluate_pairs(generate_fn, manifest: DatasetManifest, split: str = "test",
                   ssim_params: SsimParams | None = None) -> MetricsReport:
    """Score generate_fn over a manifest split.

    generate_fn(input_pixels, target_pixels) -> generated pixels, all
    (3, H, W) in the normalized [-1, 1] domain; the target argument exists
    so oracle generators can be evaluated through the same path and is
    ignored by real models.
    """
    entries = manifest.split_entries(split)
    if not entries:
        raise ValueError(f"manifest has no {split} entries")
    if manifest.target_instrument is None:
        raise ValueError("manifest does not record a target instrument")
    norm = manifest.normalization
    instrument = manifest.target_instrument
    dyn_range = norm.dynamic_range(instrument)
    if ssim_params is None:
        ssim_params = SsimParams(dynamic_range=dyn_range)

    rows = []
    for idx, entry in enumerate(entries):
        x = read_raw_cache(entry.input_path)
        y = read_raw_cache(entry.target_path)
        g = np.asarray(generate_fn(x, y), dtype=np.float32)
        if g.shape != y.shape:
            raise ShapeMismatch(f"generated {g.shape} vs target {y.shape}")
        gen_i = norm.denormalize(luminance(g), instrument)
        real_i = norm.denormalize(luminance(y), instrument)
        rows.append(ImageMetrics(
            pair_id=f"{idx:05d}",
            re_signed=relative_error(gen_i, real_i),
            pcc=pearson_cc(gen_i, real_i),
            ppe10=ppe10(gen_i, real_i, dynamic_range=dyn_range),
            ssim=ssim(gen_i, real_i, ssim_params),
        ))
    params = {
        "split": split,
        "target_instrument": instrument.value,
        "ssim_window": ssim_params.window_size,
        "ssim_sigma": ssim_params.window_sigma,
        "ssim_k1": ssim_params.k1,
        "ssim_k2": ssim_params.k2,
        "dynamic_range": ssim_params.dynamic_range,
        "ppe_threshold": 0.1,
    }
    return MetricsReport(per_image=rows, params=params)


def evaluate_dataset(checkpoint_path, manifest: DatasetManifest,
                     report_path=None,
                     ssim_params: SsimParams | None = None) -> MetricsReport:
    """Run eval-mode generation from a checkpoint over the test split."""
    from .training.checkpoint import generation_fn_from_checkpoint

    generate_fn, state = generation_fn_from_checkpoint(checkpoint_path)
    report = evaluate_pairs(generate_fn, manifest, ssim_params=ssim_params)
    report.params["checkpoint_epoch"] = state.epoch
    report.params["architecture"] = state.architecture
    if report_path is not None:
        report.write_csv(report_path)
    return report
