"""Exception types shared across the package.

Every error carries a machine-readable ``category`` that the CLI maps to a
stable exit code.
"""


class SynDetectError(Exception):
    category = "internal"


class DataError(SynDetectError):
    """Missing or malformed dataset directories / archives / checkpoints."""

    category = "data"


class ConfigurationError(SynDetectError):
    """Mismatched or invalid component configuration."""

    category = "config"


class ShapeError(SynDetectError):
    """Array shape or value-range contract violated."""

    category = "shape"


class NumericError(SynDetectError):
    """Non-finite values encountered during a forward pass or training."""

    category = "numeric"


class StageDependencyError(SynDetectError):
    """A training stage was requested before its predecessor completed."""

    category = "stage-dependency"


class CalibrationError(SynDetectError):
    """Threshold calibration could not reach the requested false-positive rate."""

    category = "calibration"


class MetricError(SynDetectError):
    """A metric is undefined for the given records (e.g. empty table)."""

    category = "metric"
