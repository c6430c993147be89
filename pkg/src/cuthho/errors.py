"""Exception hierarchy shared across the package."""


class CutHHOError(Exception):
    """Base class for all solver errors."""


class ConfigError(CutHHOError):
    """Invalid user configuration (bad level, unknown case, ...)."""


class GeometryError(CutHHOError):
    """Cut geometry the implementation does not support."""


class PairingError(GeometryError):
    """No admissible partner found for an ill-cut cell."""


class NumericalError(CutHHOError):
    """Numerical breakdown (singular matrix, solver failure, ...)."""
