"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError and its
subclasses -> 3, DivergenceError -> 4.
"""


class InvalidParameterError(ValueError):
    """A parameter bundle violates its documented invariants."""


class InvalidInputError(ValueError):
    """An input array has the wrong shape, length, or non-finite values."""


class DegenerateSignalError(ValueError):
    """A signal has zero variance where a correlation is required."""


class NoPeakError(ValueError):
    """No spectral peak above the numerical floor inside the search band."""


class ConfigError(ValueError):
    """A run configuration is malformed, inconsistent, or contains unknown keys."""


class DataError(RuntimeError):
    """A dataset on disk is missing or cannot be loaded."""


class SchemaError(DataError):
    """On-disk session metadata disagrees with the stored payload."""


class RoiDetectionError(DataError):
    """No reflector above threshold in a radar range profile."""


class SplitError(DataError):
    """Too few subjects to build disjoint folds."""


class CheckpointError(RuntimeError):
    """A checkpoint is incompatible with the requested model dimensions."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""
