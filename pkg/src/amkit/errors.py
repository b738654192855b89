"""Exception hierarchy shared by every module."""


class AmkitError(Exception):
    """Base class for library errors."""


class ValidationError(AmkitError, ValueError):
    """Invalid argument, configuration or file content."""


class DimensionError(ValidationError):
    """Array shapes do not agree."""


class InfiniteEnergyError(AmkitError, ArithmeticError):
    """Energy is +inf at the requested state (e.g. outside every LSR support)."""


class ApproximationBreakdownError(AmkitError, ArithmeticError):
    """Random-feature inner product is non-positive so the log is undefined."""


class StepSizeError(AmkitError, RuntimeError):
    """Training diverged; the step size is too large."""


class InsufficientDataError(ValidationError):
    """Too few points for a fit."""
