"""Depth-parameterized U-Net generator and PatchGAN discriminator.

The generator halves resolution once per encoder block and mirrors that on
the way up, concatenating each encoder output into the decoder stage
working at the same resolution. Ten blocks take a 1024x1024 frame down to
a 1x1 bottleneck. The discriminator scores overlapping patches of an
(input, candidate) channel concatenation and emits a 2-D realness map.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from ..errors import InvalidSpec, ShapeMismatch
from .common import as_batch, init_parameters, run_in_mode


@dataclass(frozen=True)
class GeneratorSpec:
    depth: int
    base_filters: int = 64
    max_filters: int = 512
    # decoder block indices (0 = coarsest) that apply dropout
    dropout_blocks: frozenset[int] = frozenset({0, 1, 2})
    dropout_rate: float = 0.5

    def __post_init__(self):
        if self.depth < 3:
            raise InvalidSpec(f"depth must be >= 3, got {self.depth}")
        if self.base_filters < 1 or self.max_filters < self.base_filters:
            raise InvalidSpec("need max_filters >= base_filters >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise InvalidSpec(f"dropout_rate out of range: {self.dropout_rate}")
        object.__setattr__(self, "dropout_blocks", frozenset(self.dropout_blocks))

    def width(self, i: int) -> int:
        """Channel count of encoder block i (1-based)."""
        return min(self.base_filters * 2 ** (i - 1), self.max_filters)

    def check_side(self, side: int) -> int:
        """Validate an input side length; returns the bottleneck side."""
        factor = 2**self.depth
        if side % factor != 0 or side < factor:
            raise ShapeMismatch(
                f"input side {side} incompatible with depth {self.depth} "
                f"(must be a multiple of {factor})")
        return side // factor


class UnetGenerator(nn.Module):
    def __init__(self, spec: GeneratorSpec):
        super().__init__()
        self.spec = spec
        depth = spec.depth

        self.encoders = nn.ModuleList()
        for i in range(1, depth + 1):
            in_ch = 3 if i == 1 else spec.width(i - 1)
            layers = [nn.Conv2d(in_ch, spec.width(i), 4, stride=2, padding=1)]
            # no norm on the outermost block, nor at the bottleneck where
            # batch statistics degenerate at 1x1 spatial size
            if 1 < i < depth:
                layers.append(nn.BatchNorm2d(spec.width(i)))
            layers.append(nn.LeakyReLU(0.2, inplace=True))
            self.encoders.append(nn.Sequential(*layers))

        self.decoders = nn.ModuleList()
        for j in range(depth):
            in_ch = spec.width(depth) if j == 0 else 2 * spec.width(depth - j)
            out_ch = 3 if j == depth - 1 else spec.width(depth - 1 - j)
            layers = [nn.ConvTranspose2d(in_ch, out_ch, 4, stride=2, padding=1)]
            if j == depth - 1:
                layers.append(nn.Tanh())
            else:
                layers.append(nn.BatchNorm2d(out_ch))
                if j in spec.dropout_blocks:
                    layers.append(nn.Dropout(spec.dropout_rate))
                layers.append(nn.ReLU(inplace=True))
            self.decoders.append(nn.Sequential(*layers))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        skips = []
        h = x
        for enc in self.encoders:
            h = enc(h)
            skips.append(h)
        for j, dec in enumerate(self.decoders):
            if j > 0:
                h = torch.cat([h, skips[self.spec.depth - 1 - j]], dim=1)
            h = dec(h)
        return h

    def trace(self, x: torch.Tensor, ablate_skip: int | None = None):
        """Forward pass exposing intermediates, optionally zeroing one skip.

        ablate_skip is the 1-based encoder block whose skip tensor is
        replaced by zeros before concatenation.  Returns
        (output, encoder_outputs, decoder_outputs).
        """
        skips = []
        h = x
        for enc in self.encoders:
            h = enc(h)
            skips.append(h)
        dec_outs = []
        for j, dec in enumerate(self.decoders):
            if j > 0:
                skip = skips[self.spec.depth - 1 - j]
                if ablate_skip is not None and self.spec.depth - j == ablate_skip:
                    skip = torch.zeros_like(skip)
                h = torch.cat([h, skip], dim=1)
            h = dec(h)
            dec_outs.append(h)
        return h, skips, dec_outs


@dataclass(frozen=True)
class DiscriminatorSpec:
    strided_layers: int = 3
    base_filters: int = 64
    kernel_size: int = 4

    def __post_init__(self):
        if self.strided_layers < 1:
            raise InvalidSpec(f"strided_layers must be >= 1, got {self.strided_layers}")
        if self.base_filters < 1 or self.kernel_size < 2:
            raise InvalidSpec("need base_filters >= 1 and kernel_size >= 2")

    @property
    def layer_count(self) -> int:
        """Conv layers total: the strided stack plus two stride-1 layers."""
        return self.strided_layers + 2


class PatchDiscriminator(nn.Module):
    """Patch classifier over channel-concatenated (input, candidate) pairs."""

    def __init__(self, spec: DiscriminatorSpec, in_channels: int = 6):
        super().__init__()
        self.spec = spec
        k = spec.kernel_size
        pad = (k - 1) // 2
        cap = 8 * spec.base_filters

        blocks = []
        width = spec.base_filters
        blocks.append(nn.Sequential(
            nn.Conv2d(in_channels, width, k, stride=2, padding=pad),
            nn.LeakyReLU(0.2, inplace=True),
        ))
        for _ in range(spec.strided_layers - 1):
            nxt = min(2 * width, cap)
            blocks.append(nn.Sequential(
                nn.Conv2d(width, nxt, k, stride=2, padding=pad),
                nn.BatchNorm2d(nxt),
                nn.LeakyReLU(0.2, inplace=True),
            ))
            width = nxt
        nxt = min(2 * width, cap)
        blocks.append(nn.Sequential(
            nn.Conv2d(width, nxt, k, stride=1, padding=pad),
            nn.BatchNorm2d(nxt),
            nn.LeakyReLU(0.2, inplace=True),
        ))
        # 1-channel score map; squashing happens in forward
        blocks.append(nn.Conv2d(nxt, 1, k, stride=1, padding=pad))
        self.blocks = nn.ModuleList(blocks)

    def forward(self, xy: torch.Tensor) -> torch.Tensor:
        return self.forward_features(xy)[0]

    def forward_features(self, xy: torch.Tensor):
        """Returns (patch_map, per-layer features).

        Feature i is block i's output (post-activation); the last feature is
        the raw 1-channel score map before squashing. List length equals
        spec.layer_count.
        """
        feats = []
        h = xy
        for block in self.blocks:
            h = block(h)
            feats.append(h)
        return torch.sigmoid(h), feats


def build_unet_generator(spec: GeneratorSpec, seed: int) -> UnetGenerator:
    model = UnetGenerator(spec)
    init_parameters(model, seed)
    return model


def build_patch_discriminator(spec: DiscriminatorSpec, seed: int,
                              in_channels: int = 6) -> PatchDiscriminator:
    model = PatchDiscriminator(spec, in_channels=in_channels)
    init_parameters(model, seed)
    return model


def generator_forward(g: UnetGenerator, x: torch.Tensor, mode: str = "eval") -> torch.Tensor:
    x = as_batch(x)
    if x.shape[-1] != x.shape[-2]:
        raise ShapeMismatch(f"expected square input, got {tuple(x.shape)}")
    g.spec.check_side(x.shape[-1])
    return run_in_mode(g, x, mode)


def discriminator_forward(d: PatchDiscriminator, x: torch.Tensor,
                          y: torch.Tensor) -> torch.Tensor:
    x, y = as_batch(x), as_batch(y)
    if x.shape[-2:] != y.shape[-2:]:
        raise ShapeMismatch(
            f"input/candidate spatial shapes differ: {tuple(x.shape)} vs {tuple(y.shape)}")
    return d(torch.cat([x, y], dim=1))
