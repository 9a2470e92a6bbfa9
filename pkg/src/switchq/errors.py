"""Exception hierarchy."""


class SwitchqError(Exception):
    """Base class for all package errors."""


class SpecError(SwitchqError, ValueError):
    """A model specification violates one of its invariants."""


class RegimeError(SwitchqError):
    """The requested quantity is undefined for these parameters.

    Examples: no steady state exists, an FPT mean is requested when the second
    environment is unstable, or an ``eta2 = 0`` formula is called with ``eta2 > 0``.
    """


class ConfluentRootsError(RegimeError):
    """The two dominant roots of the characteristic cubic coincide."""


class CubicRootError(SwitchqError, ArithmeticError):
    """A cubic expected to have three real roots has a complex pair."""


class ConvergenceError(SwitchqError, ArithmeticError):
    """A quadrature or series failed to meet its tolerance."""
