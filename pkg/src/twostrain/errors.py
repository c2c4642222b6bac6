"""Exception hierarchy shared by every module of the package."""


class TwoStrainError(Exception):
    """Base class for all errors raised by twostrain."""


class DomainError(TwoStrainError, ValueError):
    """A parameter or state lies outside its admissible domain."""


class StructuralError(TwoStrainError, ValueError):
    """A state vector does not match the layout of the model it is used with."""


class SingularParameterError(TwoStrainError, ArithmeticError):
    """A closed-form expression has a vanishing denominator.

    Attributes:
        expression: human-readable name of the expression that vanished.
    """

    def __init__(self, expression: str, value: float = 0.0):
        self.expression = expression
        self.value = value
        super().__init__(f"singular parameter combination: {expression} = {value!r}")


class IntegrationError(TwoStrainError, RuntimeError):
    """The time stepper could not advance the solution.

    Attributes:
        last_time: last time (days) at which the solution was still valid.
    """

    def __init__(self, message: str, last_time: float):
        self.last_time = last_time
        super().__init__(f"{message} (last good t={last_time:g})")


class ConfigError(TwoStrainError, ValueError):
    """Invalid run configuration; ``key`` names the offending entry."""

    def __init__(self, message: str, key: str | None = None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)
