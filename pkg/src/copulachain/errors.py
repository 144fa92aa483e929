"""Exception hierarchy shared by all modules."""


class CopulaChainError(Exception):
    """Base class for errors raised by this package."""


class InvalidSpec(CopulaChainError, ValueError):
    """A copula or marginal description failed validation."""


class OutOfRangeParameter(InvalidSpec):
    def __init__(self, parameter: str, value, allowed: str, family: str = ""):
        self.parameter = parameter
        self.value = value
        self.allowed = allowed
        self.family = family
        where = f"{family} " if family else ""
        super().__init__(f"{where}parameter {parameter}={value!r} outside allowed range {allowed}")


class BadWeights(InvalidSpec):
    """Mixture weights are negative or do not sum to one."""


class NumericalFailure(CopulaChainError, ArithmeticError):
    def __init__(self, message: str, error_estimate: float = float("nan")):
        self.error_estimate = error_estimate
        super().__init__(f"{message} (error estimate {error_estimate:.3g})")


class NoConvergence(NumericalFailure):
    def __init__(self, message: str, bracket_width: float = float("nan"), step: int | None = None):
        self.bracket_width = bracket_width
        self.step = step
        if step is not None:
            message = f"{message} at step {step}"
        super().__init__(message, bracket_width)


class ResolutionMismatch(CopulaChainError, ValueError):
    """Two transition matrices on different grids were combined."""


class TooShort(CopulaChainError, ValueError):
    """A simulated path has too few transitions for the requested grid."""
