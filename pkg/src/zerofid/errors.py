"""Exception hierarchy shared by all zerofid modules."""


class ZeroFidError(Exception):
    """Base class for errors raised by zerofid."""


class InvalidArgumentError(ZeroFidError, ValueError):
    """An argument violates a documented precondition."""


class UnsupportedError(ZeroFidError, ValueError):
    """The request is well formed but outside what the toolkit supports."""


class IllConditionedStateSetError(ZeroFidError, ValueError):
    """The overlap (Gram) matrix of a state set is singular or near singular."""

    def __init__(self, message: str, condition_number: float):
        super().__init__(f"{message} (condition number {condition_number:.3e})")
        self.condition_number = condition_number


class FitDegenerateError(ZeroFidError, ValueError):
    """Decay data do not identify the exponential model."""
