"""Exception taxonomy: config errors, data errors, numeric failures."""


class DlnetError(Exception):
    """Base class for everything raised deliberately by this package."""


class ConfigError(DlnetError):
    """Invalid architecture or training configuration."""


class DataError(DlnetError):
    """Unreadable, inconsistent, or mismatched input files."""


class TrainError(DlnetError):
    """Training diverged or could not proceed."""
