"""Exception taxonomy shared across the package.

The CLI maps these onto process exit codes, so library code should raise the
most specific type that applies rather than bare ValueError.
"""


class ModrecError(Exception):
    """Base class for all package errors."""


class ConfigError(ModrecError):
    """Invalid configuration: bad field values, unknown names, missing keys."""


class DataError(ModrecError):
    """Invalid data: malformed files, inconsistent shapes, bad labels."""


class DegenerateExampleError(DataError):
    """An example that cannot be processed (all-zero power, empty)."""


class InsufficientLengthError(DataError):
    """A waveform shorter than an operation requires."""


class NumericError(ModrecError):
    """A numeric failure: non-finite values where finite ones are required."""
