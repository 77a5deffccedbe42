"""Exception types shared across the package."""


class SpcertError(Exception):
    """Base class for all package errors."""


class RangeError(SpcertError, ValueError):
    """A parameter violates one of the admissible exponent/range inequalities."""


class DegenerateOscillation(SpcertError):
    """Oscillation is zero: intrinsic rescaling is undefined and iteration stops."""


class NonlinearDivergence(SpcertError):
    """The nonlinear solve did not reach the residual tolerance."""

    def __init__(self, message, step_index=None, residual=None):
        super().__init__(message)
        self.step_index = step_index
        self.residual = residual


class NegativityError(SpcertError):
    """An unclamped iterate dropped significantly below zero (scheme failure)."""


class EmptyCylinder(SpcertError):
    """No discrete grid point falls inside the requested cylinder."""


class EmptyBall(SpcertError):
    """No discrete grid point falls inside the requested ball."""


class SupportError(SpcertError):
    """A test function's support touches or leaves the integration window."""


class DomainError(SpcertError):
    """A required spatial margin around the check window leaves the domain."""


class ZeroSup(SpcertError):
    """Normalization by a zero supremum requested."""


class PreconditionError(SpcertError):
    """A check's standing precondition (not its hypothesis) is violated."""


class InitialOscillationViolated(SpcertError):
    """Measured oscillation on the seed cylinder exceeds the declared bound."""


class ParseError(SpcertError, ValueError):
    """Malformed configuration text."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class ValidationError(SpcertError, ValueError):
    """A parsed configuration fails semantic validation."""


class FormatError(SpcertError, ValueError):
    """A snapshot file does not follow the SPFIELD format."""
