from .data import DATASETS, DatasetHandle, DatasetInfo, load_dataset, load_split_arrays, materialize
from .errors import (
    CalibrationError,
    ConfigurationError,
    DataError,
    MetricError,
    NumericError,
    ShapeError,
    StageDependencyError,
    SynDetectError,
)
from .images import clip_to_unit, to_synthesis_space, validate_image_batch, validate_label_batch
from .seeding import Seed, make_generator, make_rng, seed_all, spawn

__all__ = [
    "DATASETS",
    "DatasetHandle",
    "DatasetInfo",
    "load_dataset",
    "load_split_arrays",
    "materialize",
    "CalibrationError",
    "ConfigurationError",
    "DataError",
    "MetricError",
    "NumericError",
    "ShapeError",
    "StageDependencyError",
    "SynDetectError",
    "clip_to_unit",
    "to_synthesis_space",
    "validate_image_batch",
    "validate_label_batch",
    "Seed",
    "make_generator",
    "make_rng",
    "seed_all",
    "spawn",
]
