"""Adversarial training loop, periodic checkpointing, best-model selection.

Each step runs one discriminator update (real pair vs detached fake pair)
followed by one generator update on the architecture's composite objective.
Batch order is a seeded shuffle of the manifest's train entries, so two
runs with the same config and seed replay the same sequence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from ..data.cache import read_raw_cache
from ..data.manifest import DatasetManifest
from ..errors import DivergenceDetected, EmptyTrainSet
from ..losses import (
    adversarial_d_loss,
    pix2pix_generator_objective,
    pix2pixhd_objective,
)
from ..metrics import evaluate_dataset
from ..models import (
    build_hd_generator,
    build_multiscale_discriminator,
    build_patch_discriminator,
    build_unet_generator,
)
from .checkpoint import checkpoint_state_from, load_checkpoint, save_checkpoint
from .config import (
    TrainConfig,
    resolve_discriminator_spec,
    resolve_generator_spec,
    write_config,
)

LOG_HEADER = "step,epoch,d_loss,g_adv,g_l1_or_fm,g_total"


@dataclass
class TrainResult:
    checkpoint_paths: list[str]
    log_path: str
    final_losses: dict[str, float]


def build_models(cfg: TrainConfig, gen_spec=None, disc_spec=None):
    gen_spec = gen_spec or resolve_generator_spec(cfg)
    disc_spec = disc_spec or resolve_discriminator_spec(cfg)
    if cfg.architecture == "pix2pix":
        generator = build_unet_generator(gen_spec, cfg.seed)
        discriminator = build_patch_discriminator(disc_spec, cfg.seed + 1)
    else:
        generator = build_hd_generator(gen_spec, cfg.seed)
        discriminator = build_multiscale_discriminator(disc_spec, cfg.seed + 1)
    return generator, discriminator


class _PairLoader:
    def __init__(self, manifest: DatasetManifest, split: str):
        self.entries = manifest.split_entries(split)

    def __len__(self):
        return len(self.entries)

    def batch(self, indices) -> tuple[torch.Tensor, torch.Tensor]:
        xs, ys = [], []
        for i in indices:
            entry = self.entries[i]
            xs.append(torch.from_numpy(read_raw_cache(entry.input_path)))
            ys.append(torch.from_numpy(read_raw_cache(entry.target_path)))
        return torch.stack(xs), torch.stack(ys)


def train(cfg: TrainConfig, manifest: DatasetManifest, out_dir,
          gen_spec=None, disc_spec=None, log_every: int = 0,
          step_observer=None) -> TrainResult:
    """Run the full loop; returns checkpoint paths and the loss log path.

    Raises EmptyTrainSet when the manifest has no train entries and
    DivergenceDetected (carrying checkpoints saved so far) when any loss
    goes non-finite. step_observer, when given, is called as
    observer(stage, generator, discriminator) with stage in
    {"pre_step", "post_d", "post_g"}; instrumentation only.
    """
    cfg.validate()
    loader = _PairLoader(manifest, "train")
    if len(loader) == 0:
        raise EmptyTrainSet("manifest has no train entries")

    out_dir = Path(out_dir)
    ckpt_dir = out_dir / "checkpoints"
    log_dir = out_dir / "logs"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    log_dir.mkdir(parents=True, exist_ok=True)
    log_path = log_dir / "training_log.csv"

    torch.manual_seed(cfg.seed)
    generator, discriminator = build_models(cfg, gen_spec, disc_spec)
    generator.train()
    discriminator.train()
    opt_g = torch.optim.Adam(generator.parameters(), lr=cfg.learning_rate,
                             betas=(cfg.beta1, cfg.beta2))
    opt_d = torch.optim.Adam(discriminator.parameters(), lr=cfg.learning_rate,
                             betas=(cfg.beta1, cfg.beta2))

    shuffle_rng = np.random.default_rng(cfg.seed)
    saturating = cfg.g_adv_form == "saturating"
    config_text = write_config(cfg)
    checkpoints: list[str] = []
    step = 0
    last_row: dict[str, float] = {}

    with open(log_path, "w") as log:
        log.write(LOG_HEADER + "\n")
        for epoch in range(1, cfg.epochs + 1):
            order = shuffle_rng.permutation(len(loader))
            for lo in range(0, len(order), cfg.batch_size):
                x, y = loader.batch(order[lo:lo + cfg.batch_size])
                step += 1
                if step_observer:
                    step_observer("pre_step", generator, discriminator)

                fake = generator(x)

                # discriminator update on (real pair, detached fake pair)
                opt_d.zero_grad(set_to_none=True)
                if cfg.architecture == "pix2pix":
                    real_map = discriminator(torch.cat([x, y], dim=1))
                    fake_map = discriminator(torch.cat([x, fake.detach()], dim=1))
                    d_loss = adversarial_d_loss(real_map, fake_map)
                else:
                    real_outs = discriminator(torch.cat([x, y], dim=1))
                    fake_outs = discriminator(torch.cat([x, fake.detach()], dim=1))
                    d_loss = sum(
                        adversarial_d_loss(r.patch_map, f.patch_map)
                        for r, f in zip(real_outs, fake_outs))
                d_loss.backward()
                opt_d.step()
                if step_observer:
                    step_observer("post_d", generator, discriminator)

                # generator update on the composite objective
                opt_g.zero_grad(set_to_none=True)
                if cfg.architecture == "pix2pix":
                    fake_map = discriminator(torch.cat([x, fake], dim=1))
                    bundle = pix2pix_generator_objective(
                        fake_map, fake, y, cfg.loss_weights, saturating=saturating)
                else:
                    with torch.no_grad():
                        real_outs = discriminator(torch.cat([x, y], dim=1))
                    fake_outs = discriminator(torch.cat([x, fake], dim=1))
                    bundle = pix2pixhd_objective(
                        real_outs, fake_outs, cfg.loss_weights,
                        saturating=saturating, fm_normalized=cfg.fm_normalized)
                bundle.g_total.backward()
                opt_g.step()
                if step_observer:
                    step_observer("post_g", generator, discriminator)

                last_row = {
                    "step": step,
                    "epoch": epoch,
                    "d_loss": d_loss.detach().item(),
                    "g_adv": bundle.g_adv.detach().item(),
                    "g_l1_or_fm": bundle.g_match.detach().item(),
                    "g_total": bundle.g_total.detach().item(),
                }
                log.write("{step},{epoch},{d_loss:.8g},{g_adv:.8g},"
                          "{g_l1_or_fm:.8g},{g_total:.8g}\n".format(**last_row))
                if any(not math.isfinite(v) for v in
                       (last_row["d_loss"], last_row["g_total"])):
                    log.flush()
                    raise DivergenceDetected(
                        f"non-finite loss at step {step} (epoch {epoch})",
                        checkpoints=checkpoints, log_path=str(log_path))
                if log_every and step % log_every == 0:
                    print(f"  step {step} epoch {epoch} "
                          f"d={last_row['d_loss']:.4f} g={last_row['g_total']:.4f}")

            if epoch % cfg.checkpoint_interval == 0:
                path = ckpt_dir / f"checkpoint_epoch{epoch:04d}.ckpt"
                save_checkpoint(path, checkpoint_state_from(
                    generator, opt_g, cfg.architecture, epoch, config_text))
                checkpoints.append(str(path))

    return TrainResult(checkpoint_paths=checkpoints, log_path=str(log_path),
                       final_losses=last_row)


SELECTION_METRICS = ("re", "pcc", "ppe10", "ssim")


def select_best_checkpoint(checkpoint_paths, eval_manifest: DatasetManifest,
                           metric: str) -> tuple[str, list[dict]]:
    """Score every checkpoint on the eval split and return the winner.

    pcc/ppe10/ssim pick the maximum, re the minimum absolute value; ties go
    to the later epoch. Also returns the per-checkpoint metric table.
    """
    if metric not in SELECTION_METRICS:
        raise ValueError(f"metric must be one of {SELECTION_METRICS}, got {metric!r}")
    if not checkpoint_paths:
        raise ValueError("no checkpoints to select from")

    table = []
    for path in checkpoint_paths:
        report = evaluate_dataset(path, eval_manifest)
        agg = report.aggregate()
        table.append({
            "path": str(path),
            "epoch": load_checkpoint(path).epoch,
            "re": agg["re_signed"],
            "pcc": agg["pcc"],
            "ppe10": agg["ppe10"],
            "ssim": agg["ssim"],
        })

    def score(row):
        return -abs(row["re"]) if metric == "re" else row[metric]

    best = None
    for row in sorted(table, key=lambda r: r["epoch"]):
        if best is None or score(row) >= score(best):
            best = row
    return best["path"], table
