"""Exception hierarchy shared by the pricing modules."""

from __future__ import annotations


class LRSwaptionError(Exception):
    """Base class for all package errors."""


class DomainError(LRSwaptionError, ValueError):
    """An argument lies outside the domain of the requested quantity."""


class ConfigurationError(LRSwaptionError, ValueError):
    """Invalid model, trade or solver configuration.

    ``path`` names the offending configuration field when known.
    """

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class UnattainableRateError(DomainError):
    def __init__(self, rate: float, lo: float, hi: float):
        self.rate, self.lo, self.hi = rate, lo, hi
        super().__init__(f"swap rate {rate!r} outside attainable range ({lo!r}, {hi!r})")


class TransformExplosionError(DomainError):
    """The moment generating function is infinite at the requested argument."""


class DegenerateDistributionError(DomainError):
    """The transition law is a point mass, so no density exists."""


class UnsupportedConfigurationError(ConfigurationError):
    pass


class SolverFailure(LRSwaptionError, RuntimeError):
    def __init__(self, message: str, step: int | None = None, residuals: tuple | None = None):
        self.step = step
        self.residuals = residuals
        super().__init__(message)


class TruncationError(LRSwaptionError, RuntimeError):
    """State-space truncation lost too much probability mass."""


class CalibrationError(LRSwaptionError, ValueError):
    pass


class InfeasibleCurveError(CalibrationError):
    pass


class UnattainableQuoteError(CalibrationError):
    def __init__(self, message: str, quote_id: str | int | None = None):
        self.quote_id = quote_id
        super().__init__(message)
