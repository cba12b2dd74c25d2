"""Exception hierarchy shared by the library and the command line."""


class FubifError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(FubifError, ValueError):
    """Invalid or inconsistent configuration."""


class DataError(FubifError, ValueError):
    """Malformed, empty or otherwise unusable data."""


class DimensionMismatchError(FubifError, ValueError):
    """Point or parameter dimension disagrees with the model."""
