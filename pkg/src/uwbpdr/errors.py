"""Exception types shared across the package."""


class UwbPdrError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(UwbPdrError):
    """A configuration document or parameter set is invalid."""


class DegenerateTrajectoryError(ConfigError):
    """Waypoints do not form a polyline of positive length."""


class InsufficientGeometryError(UwbPdrError):
    """Fewer ranges than the solver needs for a 2D fix."""


class DegenerateGeometryError(UwbPdrError):
    """Anchor layout is rank deficient (collinear in 2D)."""


class InvalidStepError(UwbPdrError):
    """A step event violates a_max >= a_min."""


class MissingDataError(UwbPdrError):
    """Samples do not cover the requested time interval."""


class InsufficientHistoryError(UwbPdrError):
    """Too few history entries for the requested prediction."""


class EmptyWindowError(UwbPdrError):
    """The sliding error window holds no samples yet (warm-up)."""


class ModelFormatError(UwbPdrError):
    """A weight file violates the documented model format."""


class NumericalFailureError(UwbPdrError):
    """A linear-algebra step failed where the contract assumes success."""


class InitializationFailureError(UwbPdrError):
    """The filter could not obtain a converged fix to initialize from."""
