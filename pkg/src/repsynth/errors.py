"""Exception types shared across the package."""


class RepsynthError(Exception):
    """Base class for all package errors."""


class ConfigError(RepsynthError):
    """Invalid or inconsistent configuration."""


class DataError(RepsynthError):
    """Problem with input data: files, manifests, shapes, formats."""


class AudioIOError(DataError):
    """Audio file could not be read, decoded, or written."""


class NumericError(RepsynthError):
    """Numerical failure: non-finite values, undefined ratios, divergence."""
