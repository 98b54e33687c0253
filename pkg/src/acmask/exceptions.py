"""Exception types raised across the package."""


class AcMaskError(Exception):
    """Base class for all package errors."""


class DomainError(AcMaskError, ValueError):
    """An argument lies outside the domain an operation supports."""


class ConvergenceError(AcMaskError, ArithmeticError):
    """A series or quadrature did not reach its tolerance.

    Analytical SER engines raise this to ask the caller to fall back to the
    numerical-integration engine.
    """


class RegimeError(AcMaskError, ArithmeticError):
    """An asymptotic approximation is used outside its validated regime."""


class DegenerateChannelError(AcMaskError, ValueError):
    """The channel envelopes are (numerically) all zero."""
