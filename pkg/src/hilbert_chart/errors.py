"""Exception hierarchy shared by all modules."""


class ChartError(ValueError):
    """Base class for malformed or inconsistent inputs."""


class NormalizationError(ChartError):
    """A probability vector does not sum to one, or G0 != 1."""


class DomainError(ChartError):
    """An argument lies outside the domain where an operation is defined."""


class QuadratureError(ArithmeticError):
    """Numerical integration did not reach the requested tolerance.

    ``value`` and ``error`` carry the last estimate so callers can still
    report it.
    """

    def __init__(self, message: str, value: float = float("nan"), error: float = float("nan")):
        super().__init__(message)
        self.value = value
        self.error = error
