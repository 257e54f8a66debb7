"""Exception types raised across the package."""


class DunklError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(DunklError, ValueError):
    pass


class DomainError(DunklError, ValueError):
    """Argument outside the mathematical domain (e.g. t <= 0, r <= 0)."""


class NonFiniteGroupError(DunklError):
    """Group closure exceeded its element cap."""


class OracleTooLargeError(DunklError):
    """Brute-force enumeration would exceed the configured word cap."""


class PrecisionError(DunklError):
    """Quadrature failed to converge within the allowed node budget."""


class UnsupportedDimensionError(DunklError):
    pass


class WallProximityError(DunklError):
    pass


class CFLError(DunklError):
    def __init__(self, message, suggested_dt=None):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class ResolutionError(DunklError):
    pass


class ConfigurationError(DunklError, ValueError):
    pass
