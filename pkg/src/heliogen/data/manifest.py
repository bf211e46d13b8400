"""Dataset manifest: the on-disk record of what to train and test on.

Manifest file: one record per line, tab-separated
    input_path <TAB> target_path <TAB> ISO-8601 timestamp <TAB> split_tag
Sidecar (same path + ".norm", same line-oriented tab format) carries the
pairing tolerance and the per-instrument clip ranges.

Paths are stored relative to the manifest's directory when possible, so a
run directory can be moved wholesale.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from ..errors import IoFailure
from .types import Instrument, NormalizationRecord

SPLIT_TAGS = ("train", "test")


@dataclass
class ManifestEntry:
    input_path: str
    target_path: str
    timestamp: datetime
    split: str = "train"

    def __post_init__(self):
        if self.split not in SPLIT_TAGS:
            raise ValueError(f"split must be one of {SPLIT_TAGS}, got {self.split!r}")
        if self.timestamp.tzinfo is None:
            self.timestamp = self.timestamp.replace(tzinfo=timezone.utc)


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    pairing_tolerance_s: float = 600.0
    normalization: NormalizationRecord = field(default_factory=NormalizationRecord)
    # instrument whose clip range maps targets back to physical intensity
    target_instrument: Instrument | None = None

    def validate(self) -> None:
        seen: set[str] = set()
        for e in self.entries:
            for p in (e.input_path, e.target_path):
                if p in seen:
                    raise ValueError(f"path appears twice in manifest: {p}")
                seen.add(p)
        train_ts = {e.timestamp for e in self.entries if e.split == "train"}
        test_ts = {e.timestamp for e in self.entries if e.split == "test"}
        overlap = train_ts & test_ts
        if overlap:
            raise ValueError(f"train/test timestamps overlap: {sorted(overlap)[:3]}")

    def split_entries(self, split: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == split]

    def counts(self) -> dict[str, int]:
        return {tag: len(self.split_entries(tag)) for tag in SPLIT_TAGS}

    def write(self, path: str | os.PathLike) -> None:
        self.validate()
        path = Path(path)
        base = path.parent.resolve()
        lines = []
        for e in self.entries:
            lines.append("\t".join((
                _relativize(e.input_path, base),
                _relativize(e.target_path, base),
                e.timestamp.isoformat(),
                e.split,
            )))
        path.write_text("".join(line + "\n" for line in lines))

        side = ["\t".join(("tolerance", repr(float(self.pairing_tolerance_s))))]
        if self.target_instrument is not None:
            side.append("\t".join(("target", self.target_instrument.value)))
        for instrument, (lo, hi) in sorted(
                self.normalization.ranges.items(), key=lambda kv: kv[0].value):
            side.append("\t".join(("range", instrument.value, repr(lo), repr(hi))))
        Path(str(path) + ".norm").write_text("".join(line + "\n" for line in side))

    @classmethod
    def read(cls, path: str | os.PathLike) -> "DatasetManifest":
        path = Path(path)
        if not path.is_file():
            raise IoFailure(f"manifest not found: {path}")
        base = path.parent.resolve()
        entries = []
        for lineno, line in enumerate(path.read_text().splitlines(), 1):
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise IoFailure(f"{path}:{lineno}: expected 4 tab-separated fields")
            entries.append(ManifestEntry(
                input_path=_absolutize(fields[0], base),
                target_path=_absolutize(fields[1], base),
                timestamp=datetime.fromisoformat(fields[2]),
                split=fields[3],
            ))

        tolerance = 600.0
        target = None
        norm = NormalizationRecord()
        side_path = Path(str(path) + ".norm")
        if side_path.is_file():
            for line in side_path.read_text().splitlines():
                fields = line.split("\t")
                if fields[0] == "tolerance":
                    tolerance = float(fields[1])
                elif fields[0] == "target":
                    target = Instrument(fields[1])
                elif fields[0] == "range":
                    norm.set(Instrument(fields[1]), float(fields[2]), float(fields[3]))
        manifest = cls(entries=entries, pairing_tolerance_s=tolerance,
                       normalization=norm, target_instrument=target)
        manifest.validate()
        return manifest


def _relativize(path: str, base: Path) -> str:
    try:
        return os.path.relpath(Path(path).resolve(), base)
    except ValueError:
        return str(path)


def _absolutize(path: str, base: Path) -> str:
    p = Path(path)
    return str(p if p.is_absolute() else (base / p).resolve())
