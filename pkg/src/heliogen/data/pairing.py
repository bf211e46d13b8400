"""Timestamp pairing of input/target images and train/test splitting."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from datetime import datetime

from ..errors import EmptySplitWarning, UnsortedInput
from .manifest import DatasetManifest, ManifestEntry
from .types import ImagePair, NormalizationRecord, SolarImage


def match_by_timestamp(
    input_times: list[float],
    target_times: list[float],
    tolerance_s: float,
) -> list[tuple[int, int, float]]:
    """Greedy nearest-neighbor matching on (sorted) epoch-second lists.

    Repeatedly commits the unused (input, target) candidate with the
    smallest |dt| (ties broken by earlier input, then earlier target);
    candidates beyond the tolerance are never considered. Returns
    (input_index, target_index, dt) triples sorted by input time, where
    dt = target_time - input_time.
    """
    for name, times in (("input", input_times), ("target", target_times)):
        if any(b < a for a, b in zip(times, times[1:])):
            raise UnsortedInput(f"{name} timestamps are not sorted")

    candidates = []
    start = 0
    for i, t_in in enumerate(input_times):
        while start < len(target_times) and target_times[start] < t_in - tolerance_s:
            start += 1
        j = start
        while j < len(target_times) and target_times[j] <= t_in + tolerance_s:
            candidates.append((abs(target_times[j] - t_in), i, j))
            j += 1
    candidates.sort()

    used_in: set[int] = set()
    used_tg: set[int] = set()
    matches = []
    for _, i, j in candidates:
        if i in used_in or j in used_tg:
            continue
        used_in.add(i)
        used_tg.add(j)
        matches.append((i, j, target_times[j] - input_times[i]))
    matches.sort(key=lambda m: input_times[m[0]])
    return matches


def pair_by_timestamp(
    inputs: list[SolarImage],
    targets: list[SolarImage],
    tolerance_s: float,
) -> list[ImagePair]:
    """Pair magnetogram-role and EUV-role images; each image used at most once."""
    matches = match_by_timestamp(
        [img.timestamp.timestamp() for img in inputs],
        [img.timestamp.timestamp() for img in targets],
        tolerance_s,
    )
    return [ImagePair(inputs[i], targets[j], dt) for i, j, dt in matches]


@dataclass(frozen=True)
class DateRangeRule:
    """Half-open [start, end) date window tagging entries as test."""

    start: datetime
    end: datetime

    def is_test(self, timestamp: datetime) -> bool:
        start, end = self.start, self.end
        if start.tzinfo is None and timestamp.tzinfo is not None:
            timestamp = timestamp.replace(tzinfo=None)
        return start <= timestamp < end


def split_manifest(
    entries: list[ManifestEntry],
    rule: DateRangeRule,
    pairing_tolerance_s: float,
    normalization: NormalizationRecord,
) -> DatasetManifest:
    """Tag entries train/test by the date rule and assemble the manifest.

    An empty side is a warning, not an error: screening or a narrow date
    window can legitimately produce one.
    """
    for entry in entries:
        entry.split = "test" if rule.is_test(entry.timestamp) else "train"
    manifest = DatasetManifest(
        entries=sorted(entries, key=lambda e: e.timestamp),
        pairing_tolerance_s=pairing_tolerance_s,
        normalization=normalization,
    )
    counts = manifest.counts()
    for tag, n in counts.items():
        if n == 0:
            warnings.warn(f"{tag} split is empty ({counts})", EmptySplitWarning)
    manifest.validate()
    return manifest
