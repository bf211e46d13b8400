from .cache import read_raw_cache, write_raw_cache
from .fits_io import load_fits, observed_at, write_fits
from .manifest import DatasetManifest, ManifestEntry
from .pairing import DateRangeRule, match_by_timestamp, pair_by_timestamp, split_manifest
from .preprocess import instrument_from_header, preprocess, quality_screen
from .synthetic import SyntheticTask, make_synthetic_dataset, synthetic_target_from_input
from .types import (
    ImagePair,
    Instrument,
    NormalizationRecord,
    QualityVerdict,
    ScreenReason,
    ScreeningThresholds,
    SolarImage,
)

__all__ = [
    "DatasetManifest",
    "DateRangeRule",
    "ImagePair",
    "Instrument",
    "ManifestEntry",
    "NormalizationRecord",
    "QualityVerdict",
    "ScreenReason",
    "ScreeningThresholds",
    "SolarImage",
    "SyntheticTask",
    "instrument_from_header",
    "load_fits",
    "make_synthetic_dataset",
    "match_by_timestamp",
    "observed_at",
    "pair_by_timestamp",
    "preprocess",
    "quality_screen",
    "read_raw_cache",
    "split_manifest",
    "synthetic_target_from_input",
    "write_fits",
    "write_raw_cache",
]
