"""Exception and warning types raised across the package."""


class TailsitterError(Exception):
    """Base class for all package errors."""


class DomainError(TailsitterError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class TableParseError(TailsitterError, ValueError):
    """A coefficient table could not be parsed.

    ``row`` is the 1-based data row index (header excluded) when the
    problem is tied to a specific row, otherwise ``None``.
    """

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class DegenerateSpeedError(TailsitterError, ValueError):
    """Airspeed too small for an operation that divides by it."""


class ConditioningError(TailsitterError, ArithmeticError):
    """A linear system is singular or too ill-conditioned to trust."""


class NearSingularityError(ConditioningError):
    """The flatness N-matrix is close to singular (usually V -> 0)."""


class ConvergenceError(TailsitterError, ArithmeticError):
    """An iterative solver did not reach its tolerance."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class StallError(ConvergenceError):
    """No angle-of-attack root exists near the warm start (stall)."""


class DivergenceError(TailsitterError, ArithmeticError):
    """The simulated state became non-finite."""


class ValidationError(TailsitterError, ValueError):
    """A scenario file failed validation; ``field`` names the culprit."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class StallWarning(UserWarning):
    """Emitted when flatness detects a stall-type alpha failure."""


class SymmetrizationWarning(UserWarning):
    """Emitted when a coefficient table violated lateral symmetry."""


class ClampedReferenceWarning(UserWarning):
    """The MPC reference input lies outside the actuator bounds."""
