"""Exception types shared across the package."""


class HartreeError(Exception):
    """Base class for all package errors."""


class RangeViolation(HartreeError, ValueError):
    """One or more parameter constraints failed.

    ``violations`` lists every failed inequality as a readable string.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DegenerateDenominator(HartreeError, ZeroDivisionError):
    pass


class GridMismatch(HartreeError, ValueError):
    pass


class ZeroField(HartreeError, ValueError):
    pass


class NonPositiveIterate(HartreeError, RuntimeError):
    pass


class DivergedRenormalizer(HartreeError, RuntimeError):
    pass


class NotConverged(HartreeError, RuntimeError):
    pass


class NonFinite(HartreeError, FloatingPointError):
    """NaN/Inf appeared during time stepping.

    Carries the time of the offending step, the last finite time and the
    partial diagnostics series recorded up to that point.
    """

    def __init__(self, t, last_finite_t, series=None):
        self.t = t
        self.last_finite_t = last_finite_t
        self.series = series
        super().__init__(f"non-finite field at t={t:.6g} (last finite t={last_finite_t:.6g})")


class EmptySeries(HartreeError, ValueError):
    pass


class InsufficientSamples(HartreeError, ValueError):
    pass


class ParseError(HartreeError, ValueError):
    def __init__(self, line, message):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")


class ValidationError(HartreeError, ValueError):
    def __init__(self, field, constraint):
        self.field = field
        self.constraint = constraint
        super().__init__(f"{field}: {constraint}")


class FormatError(HartreeError, ValueError):
    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
