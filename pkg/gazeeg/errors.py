"""Exceptions raised by gazeeg.

Subclasses of :class:`ValidationError` signal bad input (CLI exit code 1),
everything else derived from :class:`GazeegError` is a runtime failure
(CLI exit code 2).
"""


class GazeegError(Exception):
    """Base class of all gazeeg errors."""


class ValidationError(GazeegError):
    """Input data, configuration or arguments are invalid."""


class MissingFile(ValidationError, FileNotFoundError):
    pass


class SchemaError(ValidationError, ValueError):
    pass


class ClockError(ValidationError, ValueError):
    pass


class CoverageError(ValidationError, ValueError):
    pass


class RangeError(ValidationError, ValueError):
    pass


class GeometryError(ValidationError, ValueError):
    pass


class ConfigError(ValidationError, ValueError):
    pass


class FilterDesignError(ValidationError, ValueError):
    pass


class EpochTooShort(ValidationError, ValueError):
    pass


class DegenerateSignal(ValidationError, ValueError):
    pass


class DuplicateFeatureName(ValidationError, ValueError):
    pass


class SchemaMismatch(ValidationError, ValueError):
    pass


class NothingToReport(ValidationError, ValueError):
    pass


class TooFewChannels(GazeegError, RuntimeError):
    pass


class TooFewSamples(GazeegError, RuntimeError):
    pass


class OneClassOnly(GazeegError, RuntimeError):
    pass


class AllRejected(GazeegError, RuntimeError):
    pass


class SingularCovariance(GazeegError, RuntimeError):
    pass


class InsufficientMemory(GazeegError, MemoryError):
    pass
