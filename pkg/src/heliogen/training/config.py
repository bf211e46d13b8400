"""Run configuration: a flat key=value text file, every field explicit.

Hyperparameters live in the config file (reproducibility); command-line
flags carry only paths and seeds. Architecture spec overrides are prefixed
gen. / disc. and validated against the chosen architecture.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import InvalidSpec
from ..losses import LossWeights
from ..models import (
    DiscriminatorSpec,
    GeneratorSpec,
    HDGeneratorSpec,
    MultiScaleDiscriminatorSpec,
)

ARCHITECTURES = ("pix2pix", "pix2pixhd")
G_ADV_FORMS = ("non_saturating", "saturating")


class ConfigError(ValueError):
    """Carries every offending key, not just the first."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass
class TrainConfig:
    epochs: int = 200
    checkpoint_interval: int = 10
    batch_size: int = 1
    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    seed: int = 0
    architecture: str = "pix2pix"
    loss_weights: LossWeights = field(default_factory=LossWeights)
    image_size: int = 1024
    g_adv_form: str = "non_saturating"
    fm_normalized: bool = True
    generator_overrides: dict = field(default_factory=dict)
    discriminator_overrides: dict = field(default_factory=dict)

    def validate(self) -> None:
        problems = []
        if self.epochs < 1:
            problems.append(f"epochs must be >= 1, got {self.epochs}")
        if self.checkpoint_interval < 1:
            problems.append(f"checkpoint_interval must be >= 1, got {self.checkpoint_interval}")
        if self.batch_size < 1:
            problems.append(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0:
            problems.append(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.architecture not in ARCHITECTURES:
            problems.append(f"architecture must be one of {ARCHITECTURES}, "
                            f"got {self.architecture!r}")
        if self.g_adv_form not in G_ADV_FORMS:
            problems.append(f"g_adv_form must be one of {G_ADV_FORMS}, "
                            f"got {self.g_adv_form!r}")
        size = self.image_size
        if size < 8 or size & (size - 1):
            problems.append(f"image_size must be a power of two >= 8, got {size}")
        if problems:
            raise ConfigError(problems)


# key -> (attribute, caster)
_SCALAR_KEYS = {
    "epochs": int,
    "checkpoint_interval": int,
    "batch_size": int,
    "learning_rate": float,
    "beta1": float,
    "beta2": float,
    "seed": int,
    "architecture": str,
    "image_size": int,
    "g_adv_form": str,
}
_GEN_KEYS = {
    "pix2pix": {"depth": int, "base_filters": int, "max_filters": int,
                "dropout_rate": float, "dropout_blocks": str},
    "pix2pixhd": {"global_downsamples": int, "global_residual_blocks": int,
                  "enhancer_residual_blocks": int, "base_filters": int},
}
_DISC_KEYS = {
    "pix2pix": {"strided_layers": int, "base_filters": int, "kernel_size": int},
    "pix2pixhd": {"strided_layers": int, "base_filters": int, "kernel_size": int,
                  "num_scales": int},
}


def _parse_bool(text: str) -> bool:
    if text.lower() in ("true", "1", "yes"):
        return True
    if text.lower() in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_config(text: str) -> TrainConfig:
    """Parse key=value lines; raises ConfigError listing every bad key."""
    raw: dict[str, str] = {}
    problems: list[str] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected key=value, got {line!r}")
            continue
        key, value = line.split("=", 1)
        key, value = key.strip(), value.strip()
        if key in raw:
            problems.append(f"duplicate key: {key}")
        raw[key] = value

    cfg = TrainConfig()
    architecture = raw.get("architecture", cfg.architecture)
    gen_keys = _GEN_KEYS.get(architecture, {})
    disc_keys = _DISC_KEYS.get(architecture, {})

    lambda_l1, lambda_fm = cfg.loss_weights.lambda_l1, cfg.loss_weights.lambda_fm
    for key, value in raw.items():
        try:
            if key in _SCALAR_KEYS:
                setattr(cfg, key, _SCALAR_KEYS[key](value))
            elif key == "lambda_l1":
                lambda_l1 = float(value)
            elif key == "lambda_fm":
                lambda_fm = float(value)
            elif key == "fm_normalized":
                cfg.fm_normalized = _parse_bool(value)
            elif key.startswith("gen."):
                sub = key[4:]
                if sub not in gen_keys:
                    problems.append(f"unknown key: {key}")
                    continue
                cfg.generator_overrides[sub] = gen_keys[sub](value)
            elif key.startswith("disc."):
                sub = key[5:]
                if sub not in disc_keys:
                    problems.append(f"unknown key: {key}")
                    continue
                cfg.discriminator_overrides[sub] = disc_keys[sub](value)
            else:
                problems.append(f"unknown key: {key}")
        except ValueError as exc:
            problems.append(f"bad value for {key}: {exc}")
    try:
        cfg.loss_weights = LossWeights(lambda_l1=lambda_l1, lambda_fm=lambda_fm)
    except ValueError as exc:
        problems.append(str(exc))
    if problems:
        raise ConfigError(problems)
    cfg.validate()
    return cfg


def write_config(cfg: TrainConfig) -> str:
    lines = [
        f"epochs={cfg.epochs}",
        f"checkpoint_interval={cfg.checkpoint_interval}",
        f"batch_size={cfg.batch_size}",
        f"learning_rate={cfg.learning_rate!r}",
        f"beta1={cfg.beta1!r}",
        f"beta2={cfg.beta2!r}",
        f"seed={cfg.seed}",
        f"architecture={cfg.architecture}",
        f"lambda_l1={cfg.loss_weights.lambda_l1!r}",
        f"lambda_fm={cfg.loss_weights.lambda_fm!r}",
        f"image_size={cfg.image_size}",
        f"g_adv_form={cfg.g_adv_form}",
        f"fm_normalized={str(cfg.fm_normalized).lower()}",
    ]
    for key, value in sorted(cfg.generator_overrides.items()):
        lines.append(f"gen.{key}={value}")
    for key, value in sorted(cfg.discriminator_overrides.items()):
        lines.append(f"disc.{key}={value}")
    return "\n".join(lines) + "\n"


def resolve_generator_spec(cfg: TrainConfig):
    ov = dict(cfg.generator_overrides)
    if cfg.architecture == "pix2pix":
        depth = ov.pop("depth", int(math.log2(cfg.image_size)))
        blocks = ov.pop("dropout_blocks", None)
        kwargs = dict(depth=depth, **ov)
        if blocks is not None:
            kwargs["dropout_blocks"] = frozenset(
                int(b) for b in str(blocks).split(",") if b.strip())
        return GeneratorSpec(**kwargs)
    if cfg.architecture == "pix2pixhd":
        downs = ov.pop("global_downsamples", 3 if cfg.image_size >= 256 else 2)
        return HDGeneratorSpec(global_downsamples=downs, **ov)
    raise InvalidSpec(f"unknown architecture {cfg.architecture!r}")


def resolve_discriminator_spec(cfg: TrainConfig):
    ov = dict(cfg.discriminator_overrides)
    if cfg.architecture == "pix2pix":
        return DiscriminatorSpec(**ov)
    if cfg.architecture == "pix2pixhd":
        num_scales = ov.pop("num_scales", 2)
        return MultiScaleDiscriminatorSpec(num_scales=num_scales,
                                           base=DiscriminatorSpec(**ov))
    raise InvalidSpec(f"unknown architecture {cfg.architecture!r}")
