"""Exception hierarchy shared by all modules."""


class InsiderLabError(Exception):
    """Base class for all errors raised by the package."""


class DomainError(InsiderLabError, ValueError):
    """An argument lies outside the domain of the operation."""


class SingularityError(InsiderLabError, ArithmeticError):
    """A drift or filter denominator vanishes where it must stay positive."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class RangeError(InsiderLabError, ValueError):
    """A price lies outside the range of the pricing function."""


class NumericError(InsiderLabError, ArithmeticError):
    """Non-finite state encountered during evaluation or simulation."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ConstructionError(InsiderLabError, ValueError):
    """A weighting function could not be constructed for the partition."""

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = tuple(indices)


class ConfigError(InsiderLabError, ValueError):
    """Malformed scenario configuration."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
