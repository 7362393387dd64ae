"""Exception hierarchy. Every error carries a category that the CLI maps to
an exit code: usage -> 2, data -> 3, numeric -> 4."""


class PoseAffectError(Exception):
    category = "data"


class UsageError(PoseAffectError):
    category = "usage"


class NumericError(PoseAffectError):
    """Non-finite values encountered where finite math was required."""

    category = "numeric"


class DimensionError(PoseAffectError):
    """Array shape does not match the declared topology or parameters."""


class InvalidRotationError(PoseAffectError):
    """Input does not describe a proper rotation."""


class InvalidTopologyError(PoseAffectError):
    """Joint tree is malformed (cycles, multiple roots, bad mirror pairs)."""


class RateError(PoseAffectError):
    """Sample-rate pair does not yield an integer subsampling stride."""


class LabelError(PoseAffectError):
    """Invalid emotion or intensity label."""


class CorpusFormatError(PoseAffectError):
    """Corpus file violates the line-oriented record schema."""


class ConfigError(PoseAffectError):
    """Invalid configuration values."""


class CheckpointError(PoseAffectError):
    """Checkpoint file is corrupt, truncated, or shape-incompatible."""


class FeatureError(PoseAffectError):
    """Sequence too short or degenerate for feature extraction."""


class UndefinedCorrelationError(PoseAffectError):
    """Correlation requested on a zero-variance vector."""


class StreamProtocolError(PoseAffectError):
    """Malformed or out-of-order message on the frame stream."""
