"""Exception types shared across the package."""


class DistillLabError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(DistillLabError):
    """A configuration value or combination is invalid."""


class DatasetError(DistillLabError):
    """A dataset file or sample collection is unusable."""


class DivergenceError(DistillLabError):
    """Training produced a non-finite loss; the message names the epoch."""


class ExportError(DistillLabError):
    """A model cannot be serialized to the portable weight format."""
