"""Exception types shared across the pipeline."""


class FaultcastError(Exception):
    """Base class for everything this package raises on purpose."""


class DataFormatError(FaultcastError, ValueError):
    """Malformed input data: bad CSV cell, duplicate column, missing target."""


class ConfigError(FaultcastError, ValueError):
    """Invalid pipeline configuration (bad thresholds, unknown keys, ...)."""


class BundleError(FaultcastError, RuntimeError):
    """Corrupt or version-incompatible model/preprocessor bundle."""
