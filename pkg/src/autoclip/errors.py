"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument is outside its documented domain."""


class InvalidStateError(RuntimeError):
    """An optimizer state does not match the config it is used with."""


class UnsupportedMetricError(ValueError):
    """A metric (e.g. accuracy) was requested for a task that has none."""


class CalibrationError(RuntimeError):
    """Noise calibration could not reach the target budget in the search range."""


class DomainError(ValueError):
    """A function was evaluated at or beyond the boundary of its domain."""


class AuditFailureError(AssertionError):
    """A grid audit found points violating a claimed inequality."""


class ParseError(ValueError):
    """A dataset file is malformed."""


class NumericAbortError(RuntimeError):
    """Training hit a non-finite loss or parameter and stopped."""
