"""Exception types raised by the estimators and bound evaluators."""


class OCEError(Exception):
    """Base class for every error raised by this package."""


class DisutilityOverflowError(OCEError, OverflowError):
    """The entropic exponent left the double-precision range."""


class KinkError(OCEError, ValueError):
    """A derivative was requested at a point where it does not exist."""


class UnsupportedError(OCEError, ValueError):
    """The requested operation is not defined for this disutility family."""


class NoClosedFormError(OCEError):
    """No closed-form risk exists for this (disutility, model) pair."""


class DomainError(OCEError, ValueError):
    """An argument lies outside the domain of the operation."""


class NoRootError(OCEError, RuntimeError):
    """The first-order condition could not be bracketed."""


class IncompleteConstantsError(OCEError, ValueError):
    """A bound needs a constant that was not supplied."""


class DivergenceError(OCEError, FloatingPointError):
    """A stochastic-approximation iterate became non-finite at ``step`` of ``stream``."""

    def __init__(self, message: str, step=None, stream=None):
        super().__init__(message)
        self.step = step
        self.stream = stream


class BudgetError(OCEError, ValueError):
    """The bandit budget is too small for the number of arms."""


class EmptyStreamError(OCEError, ValueError):
    """The stream has not received any sample yet."""
