"""Exception hierarchy shared by all modules."""


class MultitimeError(Exception):
    """Base class for every error raised by the package."""


class InvalidGridError(MultitimeError, ValueError):
    pass


class InsufficientResolutionError(MultitimeError, ValueError):
    pass


class InvalidStepError(MultitimeError, ValueError):
    pass


class DimensionError(MultitimeError, ValueError):
    pass


class ValidationError(MultitimeError, ValueError):
    """Aggregated invariant violations.

    ``violations`` holds every :class:`~multitime.trajectory.Violation` found,
    not just the first one.
    """

    def __init__(self, violations, message=None):
        self.violations = list(violations)
        if message is None:
            message = "; ".join(v.message for v in self.violations) or "invalid input"
        super().__init__(message)


class DomainError(ValidationError):
    """A velocity reached the light cone, so the square roots are undefined."""


class InvalidRegularizationError(ValidationError):
    pass


class NoTimelikePathError(MultitimeError, ValueError):
    pass


class DivergenceError(MultitimeError, RuntimeError):
    """An iteration failed to converge; ``history`` records its progress."""

    def __init__(self, message, history=()):
        self.history = list(history)
        super().__init__(message)


class SingularSystemError(MultitimeError, RuntimeError):
    pass


class TooLargeError(MultitimeError, ValueError):
    def __init__(self, dimension, cap):
        self.dimension = dimension
        self.cap = cap
        super().__init__(f"lattice state dimension {dimension} exceeds cap {cap}")


class EigensolverError(MultitimeError, RuntimeError):
    def __init__(self, message, history=()):
        self.history = list(history)
        super().__init__(message)


class ConfigError(MultitimeError, ValueError):
    """Configuration problem. ``usage`` separates malformed input from bad physics."""

    def __init__(self, errors, usage=False):
        self.errors = list(errors)
        self.usage = usage
        super().__init__("; ".join(self.errors))
