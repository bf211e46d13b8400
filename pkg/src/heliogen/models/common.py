"""Shared model utilities: seeded init and forward-mode plumbing."""
from __future__ import annotations

import torch
from torch import nn

from ..errors import ShapeMismatch

NORM_LAYERS = (nn.BatchNorm2d, nn.InstanceNorm2d)


def init_parameters(module: nn.Module, seed: int) -> None:
    """Deterministically (re)initialize conv and norm parameters.

    Convolution weights ~ N(0, 0.02), norm scales ~ N(1, 0.02), biases 0,
    drawn from a dedicated generator so results depend only on the seed and
    the module registration order.
    """
    gen = torch.Generator().manual_seed(seed)
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            m.weight.data.normal_(0.0, 0.02, generator=gen)
            if m.bias is not None:
                m.bias.data.zero_()
        elif isinstance(m, NORM_LAYERS) and m.affine:
            m.weight.data.normal_(1.0, 0.02, generator=gen)
            m.bias.data.zero_()


def as_batch(x: torch.Tensor) -> torch.Tensor:
    if x.dim() == 3:
        return x.unsqueeze(0)
    if x.dim() == 4:
        return x
    raise ShapeMismatch(f"expected (B, C, H, W) or (C, H, W), got {tuple(x.shape)}")


def run_in_mode(model: nn.Module, x: torch.Tensor, mode: str) -> torch.Tensor:
    """Forward in 'train' or 'eval' mode; eval disables grad and dropout."""
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if mode == "eval":
        model.eval()
        with torch.no_grad():
            return model(x)
    model.train()
    return model(x)
