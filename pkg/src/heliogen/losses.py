"""Adversarial, pixel-distance, feature-matching, and composite objectives.

Patch maps enter as probabilities in [0, 1] (the discriminators squash
their score maps); they are clamped a hair away from the endpoints before
any logarithm so a perfectly confident map cannot produce an infinity.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch

from .errors import DomainError, ShapeMismatch

PROB_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    """Composite-objective weights: pixel-distance and feature-matching."""

    lambda_l1: float = 100.0
    lambda_fm: float = 10.0

    def __post_init__(self):
        if self.lambda_l1 < 0 or self.lambda_fm < 0:
            raise ValueError("loss weights must be >= 0")


@dataclass
class LossBundle:
    """One training step's loss components.

    g_match is the unweighted pixel (l1) or feature-matching (fm) term;
    g_total = g_adv + lambda * g_match. d_loss is present when the objective
    had both real and fake maps in hand.
    """

    g_adv: torch.Tensor
    g_match: torch.Tensor
    g_total: torch.Tensor
    match_kind: str
    d_loss: torch.Tensor | None = None


def _as_map_list(maps) -> list[torch.Tensor]:
    if isinstance(maps, torch.Tensor):
        maps = [maps]
    maps = list(maps)
    if not maps:
        raise ShapeMismatch("empty patch-map list")
    return maps


def _checked_log_input(m: torch.Tensor) -> torch.Tensor:
    if torch.any(m < 0) or torch.any(m > 1):
        raise DomainError(
            f"patch map values outside [0, 1]: min={m.min().item():.4g} "
            f"max={m.max().item():.4g}")
    return m.clamp(PROB_EPS, 1.0 - PROB_EPS)


def adversarial_d_loss(real_maps, fake_maps) -> torch.Tensor:
    """Negative log likelihood of calling real pairs real and fakes fake.

    Accepts one map or one list per scale; returns the mean over scales of
    -E[log d(x,y)] - E[log(1 - d(x,g(x)))] with the expectation taken over
    patches and batch.
    """
    real_maps, fake_maps = _as_map_list(real_maps), _as_map_list(fake_maps)
    if len(real_maps) != len(fake_maps):
        raise ShapeMismatch(
            f"{len(real_maps)} real vs {len(fake_maps)} fake scales")
    total = 0.0
    for real, fake in zip(real_maps, fake_maps):
        real, fake = _checked_log_input(real), _checked_log_input(fake)
        total = total - real.log().mean() - (1.0 - fake).log().mean()
    return total / len(real_maps)


def adversarial_g_loss(fake_maps, saturating: bool = False) -> torch.Tensor:
    """Generator's adversarial term, -E[log d(x, g(x))] averaged over scales.

    saturating=True selects the literal minimization of E[log(1 - d)]
    instead of the non-saturating default.
    """
    fake_maps = _as_map_list(fake_maps)
    total = 0.0
    for fake in fake_maps:
        fake = _checked_log_input(fake)
        if saturating:
            total = total + (1.0 - fake).log().mean()
        else:
            total = total - fake.log().mean()
    return total / len(fake_maps)


def l1_pixel_loss(generated: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference over all elements."""
    if generated.shape != target.shape:
        raise ShapeMismatch(f"{tuple(generated.shape)} vs {tuple(target.shape)}")
    return (generated - target).abs().mean()


def pix2pix_generator_objective(fake_maps, generated, target, w: LossWeights,
                                saturating: bool = False) -> LossBundle:
    """Adversarial term plus lambda-weighted pixel distance."""
    g_adv = adversarial_g_loss(fake_maps, saturating=saturating)
    g_l1 = l1_pixel_loss(generated, target)
    return LossBundle(
        g_adv=g_adv,
        g_match=g_l1,
        g_total=g_adv + w.lambda_l1 * g_l1,
        match_kind="l1",
    )


def _is_nested(features) -> bool:
    return len(features) > 0 and isinstance(features[0], (list, tuple))


def feature_matching_loss(real_features, fake_features,
                          normalized: bool = True) -> torch.Tensor:
    """L1 distance between discriminator features on real vs generated pairs.

    Per scale: sum over layers i of the absolute difference, divided by that
    layer's element count when normalized (the default); multi-scale inputs
    (list of per-scale feature lists) are averaged over scales. The real
    branch is treated as constant: no gradient flows into it.
    """
    if _is_nested(real_features) or _is_nested(fake_features):
        if len(real_features) != len(fake_features):
            raise ShapeMismatch(
                f"{len(real_features)} real vs {len(fake_features)} fake scales")
        per_scale = [feature_matching_loss(r, f, normalized=normalized)
                     for r, f in zip(real_features, fake_features)]
        return sum(per_scale) / len(per_scale)

    if len(real_features) != len(fake_features):
        raise ShapeMismatch(
            f"feature list lengths differ: {len(real_features)} vs {len(fake_features)}")
    if not real_features:
        raise ShapeMismatch("empty feature list")
    total = 0.0
    for real, fake in zip(real_features, fake_features):
        if real.shape != fake.shape:
            raise ShapeMismatch(f"{tuple(real.shape)} vs {tuple(fake.shape)}")
        diff = (real.detach() - fake).abs()
        total = total + (diff.mean() if normalized else diff.sum())
    return total


def pix2pixhd_objective(scale_outputs_real, scale_outputs_fake, w: LossWeights,
                        saturating: bool = False,
                        fm_normalized: bool = True) -> LossBundle:
    """Two-scale composite: summed adversarial terms plus weighted
    feature matching, with the discriminator total reported alongside.

    Feature-matching gradients reach only the generator (real features are
    constants and the fake features' path to the discriminator parameters
    is their own; the discriminator trains on d_loss alone).
    """
    if len(scale_outputs_real) != len(scale_outputs_fake):
        raise ShapeMismatch(
            f"{len(scale_outputs_real)} real vs {len(scale_outputs_fake)} fake scales")
    if not scale_outputs_real:
        raise ShapeMismatch("no discriminator scales")

    g_adv = 0.0
    g_fm = 0.0
    d_loss = 0.0
    for real, fake in zip(scale_outputs_real, scale_outputs_fake):
        g_adv = g_adv + adversarial_g_loss(fake.patch_map, saturating=saturating)
        g_fm = g_fm + feature_matching_loss(real.features, fake.features,
                                            normalized=fm_normalized)
        d_loss = d_loss + adversarial_d_loss(real.patch_map, fake.patch_map)
    return LossBundle(
        g_adv=g_adv,
        g_match=g_fm,
        g_total=g_adv + w.lambda_fm * g_fm,
        match_kind="fm",
        d_loss=d_loss,
    )
