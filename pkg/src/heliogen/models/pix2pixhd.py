"""Coarse-to-fine generator and two-scale discriminator ensemble.

The global network translates a 2x-downsampled frame end to end; the
enhancer extracts full-resolution features, sums them with the global
network's last feature layer, and decodes the fused features back to full
resolution. Discriminators are PatchGANs over progressively average-pooled
inputs, exposing their intermediate features for the feature-matching loss.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from ..errors import InvalidSpec, ShapeMismatch
from .common import as_batch, init_parameters, run_in_mode
from .pix2pix import DiscriminatorSpec, PatchDiscriminator


@dataclass(frozen=True)
class HDGeneratorSpec:
    global_downsamples: int = 3
    global_residual_blocks: int = 9
    enhancer_residual_blocks: int = 3
    base_filters: int = 64

    def __post_init__(self):
        if self.global_downsamples < 1:
            raise InvalidSpec("global_downsamples must be >= 1")
        if self.global_residual_blocks < 1 or self.enhancer_residual_blocks < 1:
            raise InvalidSpec("residual block counts must be >= 1")
        if self.base_filters < 2 or self.base_filters % 2 != 0:
            raise InvalidSpec("base_filters must be an even number >= 2")

    def check_side(self, side: int) -> None:
        # one extra factor of 2 for the enhancer's own downsampling
        factor = 2 ** (self.global_downsamples + 1)
        if side % factor != 0 or side < factor:
            raise ShapeMismatch(
                f"input side {side} incompatible with {self.global_downsamples} "
                f"global downsamples (must be a multiple of {factor})")


class ResidualBlock(nn.Module):
    """out = in + F(in); zeroing F's parameters makes the block an identity."""

    def __init__(self, channels: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(channels, channels, 3, padding=1),
            nn.InstanceNorm2d(channels, affine=True),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels, channels, 3, padding=1),
            nn.InstanceNorm2d(channels, affine=True),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.body(x)


def _conv_norm_relu(in_ch: int, out_ch: int, kernel: int, stride: int = 1) -> list[nn.Module]:
    return [
        nn.Conv2d(in_ch, out_ch, kernel, stride=stride, padding=(kernel - 1) // 2),
        nn.InstanceNorm2d(out_ch, affine=True),
        nn.ReLU(inplace=True),
    ]


class GlobalNet(nn.Module):
    """Front-end downsampling, residual trunk, mirrored upsampling back-end.

    Emits base_filters feature channels at its input resolution; the final
    image projection belongs to the enhancer.
    """

    def __init__(self, spec: HDGeneratorSpec):
        super().__init__()
        b = spec.base_filters
        layers = _conv_norm_relu(3, b, 7)
        width = b
        for _ in range(spec.global_downsamples):
            layers += _conv_norm_relu(width, 2 * width, 3, stride=2)
            width *= 2
        layers += [ResidualBlock(width) for _ in range(spec.global_residual_blocks)]
        for _ in range(spec.global_downsamples):
            layers += [
                nn.ConvTranspose2d(width, width // 2, 3, stride=2,
                                   padding=1, output_padding=1),
                nn.InstanceNorm2d(width // 2, affine=True),
                nn.ReLU(inplace=True),
            ]
            width //= 2
        self.body = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.body(x)


class HDGenerator(nn.Module):
    def __init__(self, spec: HDGeneratorSpec):
        super().__init__()
        self.spec = spec
        b = spec.base_filters
        self.global_net = GlobalNet(spec)
        self.enhancer_front = nn.Sequential(
            *_conv_norm_relu(3, b // 2, 7),
            *_conv_norm_relu(b // 2, b, 3, stride=2),
        )
        self.enhancer_res = nn.Sequential(
            *[ResidualBlock(b) for _ in range(spec.enhancer_residual_blocks)])
        self.to_image = nn.Sequential(
            nn.ConvTranspose2d(b, b // 2, 3, stride=2, padding=1, output_padding=1),
            nn.InstanceNorm2d(b // 2, affine=True),
            nn.ReLU(inplace=True),
            nn.Conv2d(b // 2, 3, 7, padding=3),
            nn.Tanh(),
        )

    def global_features(self, x: torch.Tensor) -> torch.Tensor:
        return self.global_net(F.avg_pool2d(x, 2))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        fused = self.global_features(x) + self.enhancer_front(x)
        return self.to_image(self.enhancer_res(fused))

    def global_path(self, x: torch.Tensor) -> torch.Tensor:
        """Output with the enhancer's feature contribution ablated."""
        return self.to_image(self.enhancer_res(self.global_features(x)))


@dataclass(frozen=True)
class MultiScaleDiscriminatorSpec:
    num_scales: int = 2
    base: DiscriminatorSpec = DiscriminatorSpec()

    def __post_init__(self):
        if self.num_scales < 1:
            raise InvalidSpec("num_scales must be >= 1")


@dataclass
class ScaleOutput:
    """One discriminator scale's verdict plus its per-layer feature maps."""

    patch_map: torch.Tensor
    features: list[torch.Tensor]


class MultiScaleDiscriminator(nn.Module):
    """Independent PatchGANs; scale k sees the input average-pooled k-1 times."""

    def __init__(self, spec: MultiScaleDiscriminatorSpec, in_channels: int = 6):
        super().__init__()
        self.spec = spec
        self.scales = nn.ModuleList(
            PatchDiscriminator(spec.base, in_channels=in_channels)
            for _ in range(spec.num_scales))

    def forward(self, xy: torch.Tensor) -> list[ScaleOutput]:
        outputs = []
        h = xy
        for k, disc in enumerate(self.scales):
            if k > 0:
                h = F.avg_pool2d(h, 2)
            patch_map, feats = disc.forward_features(h)
            outputs.append(ScaleOutput(patch_map=patch_map, features=feats))
        return outputs


def build_hd_generator(spec: HDGeneratorSpec, seed: int) -> HDGenerator:
    model = HDGenerator(spec)
    init_parameters(model, seed)
    return model


def build_multiscale_discriminator(spec: MultiScaleDiscriminatorSpec, seed: int,
                                   in_channels: int = 6) -> MultiScaleDiscriminator:
    model = MultiScaleDiscriminator(spec, in_channels=in_channels)
    init_parameters(model, seed)
    return model


def hd_generator_forward(g: HDGenerator, x: torch.Tensor, mode: str = "eval") -> torch.Tensor:
    x = as_batch(x)
    if x.shape[-1] != x.shape[-2]:
        raise ShapeMismatch(f"expected square input, got {tuple(x.shape)}")
    g.spec.check_side(x.shape[-1])
    return run_in_mode(g, x, mode)


def multiscale_forward(ens: MultiScaleDiscriminator, x: torch.Tensor,
                       y: torch.Tensor) -> list[ScaleOutput]:
    x, y = as_batch(x), as_batch(y)
    if x.shape[-2:] != y.shape[-2:]:
        raise ShapeMismatch(
            f"input/candidate spatial shapes differ: {tuple(x.shape)} vs {tuple(y.shape)}")
    return ens(torch.cat([x, y], dim=1))
