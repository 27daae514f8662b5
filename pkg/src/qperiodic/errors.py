"""Exception hierarchy.

Numerical failures derive from :class:`NumericalError` and map to CLI exit
code 1; configuration problems derive from :class:`ConfigError` (exit 2).
"""


class QPeriodicError(Exception):
    """Base class for all package errors."""


class NumericalError(QPeriodicError):
    pass


class ConfigError(QPeriodicError):
    pass


class DimensionMismatch(NumericalError, ValueError):
    pass


class NotHermitian(NumericalError, ValueError):
    pass


class NoConvergence(NumericalError):
    pass


class NumericalRankAmbiguity(NumericalError):
    pass


class IndexOutOfRange(QPeriodicError, IndexError):
    pass


class EvenSiteCount(QPeriodicError, ValueError):
    pass


class UnsupportedSize(QPeriodicError, ValueError):
    pass


class InvalidAncillaState(NumericalError, ValueError):
    pass


class InvalidState(NumericalError, ValueError):
    pass


class NegativeDuration(QPeriodicError, ValueError):
    pass


class NotConverged(NumericalError):
    def __init__(self, residual, message=None):
        self.residual = residual
        super().__init__(message or f"stationary state not converged (residual {residual:.3e})")


class ZeroOperator(NumericalError, ValueError):
    pass


class StationaryStateMismatch(NumericalError):
    pass


class ZeroMode(NumericalError):
    pass


class DegenerateEigenvalue(NumericalError):
    pass


class NonvanishingFirstMoment(NumericalError, ValueError):
    pass


class StateDriftError(NumericalError):
    pass


class NonHermitianObservable(NumericalError, ValueError):
    pass


class EmptyWindow(NumericalError, ValueError):
    pass


class SchemaError(ConfigError):
    def __init__(self, path, message):
        self.path = path
        where = "/".join(str(p) for p in path) or "<root>"
        super().__init__(f"{where}: {message}")
