class DirichletLabError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(DirichletLabError, ValueError):
    """A time, index or parameter lies outside its admissible domain."""


class GridMismatchError(DirichletLabError, ValueError):
    """Two paths or curves do not live on the same time grid."""


class EvaluationError(DirichletLabError, ArithmeticError):
    """A functional returned a non-finite value."""

    def __init__(self, message, t=None, h=None, index=None):
        super().__init__(message)
        self.t = t
        self.h = h
        self.index = index


class ConfigurationError(DirichletLabError, ValueError):
    """Inconsistent model, grid or problem configuration."""

    def __init__(self, message, key=None, index=None):
        super().__init__(message)
        self.key = key
        self.index = index
