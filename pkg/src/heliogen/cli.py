"""Command-line entry point.

Subcommands: prepare (FITS -> manifest), synth-data, train, generate,
evaluate. Hyperparameters come from the config file; flags carry paths and
seeds only. Exit codes: 0 success, 2 usage/config error, 3 divergence,
4 I/O error.
"""
from __future__ import annotations

import argparse
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import data as D
from . import metrics as M
from .errors import (
    ArchitectureMismatch,
    DigestMismatch,
    DivergenceDetected,
    HeliogenError,
    InvalidSize,
    InvalidSpec,
    IoFailure,
    MalformedFits,
    MissingFile,
    MissingHeaderKey,
    NonFiniteResult,
    OverwriteRequired,
    ShapeMismatch,
)
from .training import (
    ConfigError,
    generation_fn_from_checkpoint,
    load_checkpoint,
    parse_config,
    train,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3
EXIT_IO = 4

PNG_MAPPING = "round((value+1)/2*255) clipped to [0,255]"

_USAGE_ERRORS = (ConfigError, InvalidSize, InvalidSpec, ShapeMismatch,
                 ArchitectureMismatch, MissingHeaderKey, NonFiniteResult,
                 OverwriteRequired)
_IO_ERRORS = (IoFailure, MissingFile, MalformedFits, DigestMismatch, OSError)


def _run_root() -> Path:
    return Path(os.environ.get("HELIO_RUN_ROOT", "."))


def _resolve_out(path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else _run_root() / p


def _require_writable(path: Path, overwrite: bool) -> None:
    """Existing non-empty outputs need an explicit --overwrite."""
    if overwrite:
        return
    if path.is_file():
        raise OverwriteRequired(f"output {path} exists; pass --overwrite to replace it")
    if path.is_dir() and any(path.iterdir()):
        raise OverwriteRequired(f"output directory {path} is not empty; pass --overwrite")


def _parse_test_range(text: str) -> D.DateRangeRule:
    try:
        start_text, end_text = text.split("..", 1)
        start = datetime.fromisoformat(start_text).replace(tzinfo=timezone.utc)
        end = datetime.fromisoformat(end_text).replace(tzinfo=timezone.utc)
    except ValueError as exc:
        raise ConfigError([f"bad --test-range {text!r}: expected START..END "
                           f"ISO dates ({exc})"]) from exc
    return D.DateRangeRule(start=start, end=end)


def cmd_prepare(args) -> int:
    input_dir = Path(args.input_dir)
    out_dir = _resolve_out(args.out)
    fits_paths = sorted(p for p in input_dir.glob("*")
                        if p.suffix.lower() in (".fits", ".fts"))
    if not fits_paths:
        print("no FITS files found", file=sys.stderr)
        return EXIT_USAGE
    _require_writable(out_dir, args.overwrite)

    rule = _parse_test_range(args.test_range) if args.test_range else None
    loaded = []
    rejected = 0
    for path in fits_paths:
        try:
            grid, header = D.load_fits(path)
            instrument = D.instrument_from_header(header)
            timestamp = D.observed_at(header)
        except (MalformedFits, MissingHeaderKey) as exc:
            print(f"skipping {path.name}: {exc}", file=sys.stderr)
            rejected += 1
            continue
        loaded.append((path, grid, header, instrument, timestamp))

    norm = D.NormalizationRecord()
    norm.set(D.Instrument.HMI, *D.types.DEFAULT_HMI_CLIP)
    train_targets = [g for _, g, _, instr, ts in loaded
                     if instr == D.Instrument.AIA0304
                     and not (rule and rule.is_test(ts))]
    if train_targets:
        pooled = np.concatenate([np.asarray(g, dtype=np.float64)[::4, ::4].ravel()
                                 for g in train_targets])
        hi = float(np.percentile(pooled[np.isfinite(pooled)], 99.5))
        norm.set(D.Instrument.AIA0304, 0.0, max(hi, 1.0))
    else:
        norm.set(D.Instrument.AIA0304, *D.types.DEFAULT_AIA_CLIP)

    inputs, targets = [], []
    for path, grid, header, instrument, _ in loaded:
        try:
            img = D.preprocess(grid, header, args.size, norm,
                               instrument=instrument, source_path=str(path))
        except (MissingHeaderKey, NonFiniteResult) as exc:
            print(f"rejecting {path.name}: {exc}", file=sys.stderr)
            rejected += 1
            continue
        verdict = D.quality_screen(img)
        if not verdict.accepted:
            reasons = ",".join(r.value for r in verdict.reasons)
            print(f"rejecting {path.name}: {reasons}", file=sys.stderr)
            rejected += 1
            continue
        (inputs if instrument == D.Instrument.HMI else targets).append(img)

    inputs.sort(key=lambda im: im.timestamp)
    targets.sort(key=lambda im: im.timestamp)
    pairs = D.pair_by_timestamp(inputs, targets, args.tolerance_s)
    rejected += (len(inputs) + len(targets)) - 2 * len(pairs)
    if not pairs:
        print("no image pairs within the pairing tolerance", file=sys.stderr)
        return EXIT_USAGE

    image_dir = out_dir / "images"
    image_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, pair in enumerate(pairs):
        in_path = image_dir / f"pair_{i:05d}_in.raw"
        out_path = image_dir / f"pair_{i:05d}_out.raw"
        D.write_raw_cache(in_path, pair.input.pixels)
        D.write_raw_cache(out_path, pair.target.pixels)
        entries.append(D.ManifestEntry(
            input_path=str(in_path), target_path=str(out_path),
            timestamp=pair.input.timestamp))

    if rule is not None:
        manifest = D.split_manifest(entries, rule, args.tolerance_s, norm)
    else:
        manifest = D.DatasetManifest(entries=entries,
                                     pairing_tolerance_s=args.tolerance_s,
                                     normalization=norm)
    manifest.target_instrument = D.Instrument.AIA0304
    manifest.write(out_dir / "manifest.tsv")
    counts = manifest.counts()
    print(f"paired {len(pairs)} (train {counts['train']} / test {counts['test']}), "
          f"rejected {rejected}")
    print(f"manifest: {out_dir / 'manifest.tsv'}")
    return EXIT_OK


def cmd_synth_data(args) -> int:
    out_dir = _resolve_out(args.out)
    _require_writable(out_dir, args.overwrite)
    n_test = args.n_test if args.n_test is not None else args.n // 10
    manifest = D.make_synthetic_dataset(
        out_dir, n=args.n, size=args.size, seed=args.seed,
        task=D.SyntheticTask(args.task), n_test=n_test)
    counts = manifest.counts()
    print(f"wrote {len(manifest.entries)} pairs "
          f"(train {counts['train']} / test {counts['test']}) to {out_dir}")
    return EXIT_OK


def cmd_train(args) -> int:
    config_path = Path(args.config)
    if not config_path.is_file():
        raise IoFailure(f"config not found: {config_path}")
    cfg = parse_config(config_path.read_text())
    manifest = D.DatasetManifest.read(args.manifest)

    run_dir = _resolve_out(args.out_run)
    _require_writable(run_dir, args.overwrite)
    for sub in ("checkpoints", "logs", "reports", "samples"):
        (run_dir / sub).mkdir(parents=True, exist_ok=True)
    (run_dir / "config.txt").write_text(config_path.read_text())

    result = train(cfg, manifest, run_dir, log_every=args.log_every)
    print(f"run directory: {run_dir}")
    for path in result.checkpoint_paths:
        print(f"checkpoint: {path}")
    final = result.final_losses
    print("final losses: d={d_loss:.6g} g_adv={g_adv:.6g} "
          "g_l1_or_fm={g_l1_or_fm:.6g} g_total={g_total:.6g}".format(**final))
    return EXIT_OK


def _load_generate_input(args, cfg) -> np.ndarray:
    path = Path(args.input)
    if path.suffix == ".raw":
        return D.read_raw_cache(path)
    grid, header = D.load_fits(path)
    if args.manifest:
        norm = D.DatasetManifest.read(args.manifest).normalization
    else:
        norm = D.NormalizationRecord()
        norm.set(D.Instrument.HMI, *D.types.DEFAULT_HMI_CLIP)
        norm.set(D.Instrument.AIA0304, *D.types.DEFAULT_AIA_CLIP)
    img = D.preprocess(grid, header, cfg.image_size, norm, source_path=str(path))
    return img.pixels


def cmd_generate(args) -> int:
    generate_fn, state = generation_fn_from_checkpoint(args.checkpoint)
    cfg = parse_config(state.config_text)
    pixels = _load_generate_input(args, cfg)
    side = pixels.shape[-1]
    if state.architecture != "identity" and side != cfg.image_size:
        print(f"input size {side} incompatible with checkpoint: "
              f"expected {cfg.image_size}x{cfg.image_size}", file=sys.stderr)
        return EXIT_USAGE

    out_prefix = _resolve_out(args.out)
    raw_path = out_prefix.with_suffix(".raw")
    png_path = out_prefix.with_suffix(".png")
    for path in (raw_path, png_path):
        _require_writable(path, args.overwrite)
    out_prefix.parent.mkdir(parents=True, exist_ok=True)

    generated = np.asarray(generate_fn(pixels), dtype=np.float32)
    D.write_raw_cache(raw_path, generated)

    from PIL import Image

    lum = generated.mean(axis=0)
    u8 = np.clip(np.round((lum + 1.0) * 0.5 * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(u8, "L").save(png_path)
    print(f"wrote {raw_path} and {png_path} ({u8.shape[0]}x{u8.shape[1]}, "
          f"png mapping: {PNG_MAPPING})")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    manifest = D.DatasetManifest.read(args.manifest)
    if not manifest.split_entries("test"):
        print("manifest has no test split", file=sys.stderr)
        return EXIT_USAGE
    report_path = _resolve_out(args.out_report)
    _require_writable(report_path, args.overwrite)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report = M.evaluate_dataset(args.checkpoint, manifest, report_path=report_path)
    agg = report.aggregate()
    print(f"RE {agg['re_signed']:.3f}, PCC {agg['pcc']:.3f}, "
          f"PPE10 {agg['ppe10']:.3f}, SSIM {agg['ssim']:.3f} "
          f"over {report.n_images} images")
    print(f"report: {report_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heliogen",
        description="Train and evaluate magnetogram-to-EUV translation GANs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="ingest FITS files into a dataset manifest")
    p.add_argument("--input-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=1024)
    p.add_argument("--tolerance-s", type=float, default=600.0)
    p.add_argument("--test-range", default=None,
                   help="START..END ISO dates tagged as test")
    p.add_argument("--overwrite", action="store_true")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("synth-data", help="generate a synthetic paired dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-test", type=int, default=None)
    p.add_argument("--task", default="gaussian_blobs",
                   choices=[t.value for t in D.SyntheticTask])
    p.add_argument("--overwrite", action="store_true")
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("train", help="run adversarial training")
    p.add_argument("--config", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-run", required=True)
    p.add_argument("--log-every", type=int, default=0)
    p.add_argument("--overwrite", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="run eval-mode generation on one input")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="FITS file or .raw cache")
    p.add_argument("--out", required=True, help="output path prefix")
    p.add_argument("--manifest", default=None,
                   help="manifest supplying normalization for FITS inputs")
    p.add_argument("--overwrite", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score a checkpoint on the test split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-report", required=True)
    p.add_argument("--overwrite", action="store_true")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_USAGE
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceDetected as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        for path in exc.checkpoints:
            print(f"retained checkpoint: {path}", file=sys.stderr)
        return EXIT_DIVERGED
    except _IO_ERRORS as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except HeliogenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
