"""Exception hierarchy shared across the package."""


class GazeCompError(Exception):
    """Base class for all package errors."""

    kind = "error"


class ShapeError(GazeCompError, ValueError):
    kind = "shape"


class NonFiniteError(GazeCompError, FloatingPointError):
    kind = "non_finite"


class OptimizationError(GazeCompError):
    kind = "optimization"


class ModelError(GazeCompError):
    kind = "model"


class TrainingError(GazeCompError):
    kind = "training"

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class UndefinedMetricError(GazeCompError, ValueError):
    kind = "undefined_metric"


class OracleBoundError(GazeCompError, ValueError):
    kind = "oracle_bound"


class ScriptError(GazeCompError, ValueError):
    kind = "script"


class AlignmentError(GazeCompError, ValueError):
    kind = "alignment"


class ConfigError(GazeCompError, ValueError):
    kind = "config"


class ConfigMismatchError(ConfigError):
    kind = "config_mismatch"


class FormatError(GazeCompError):
    kind = "format"


class VersionMismatchError(FormatError):
    kind = "version_mismatch"


class TruncationError(FormatError):
    kind = "truncation"

    def __init__(self, message, offset):
        super().__init__(message)
        self.offset = offset


class InconsistencyError(FormatError):
    kind = "inconsistency"


class ChecksumError(FormatError):
    kind = "checksum"
