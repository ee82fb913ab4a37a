"""Exception types shared across the package."""


class CmeError(Exception):
    """Base class for errors raised by this package."""


class DomainError(CmeError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class RangeError(DomainError):
    """A value lies outside the range of the conditional-mean map."""


class CapabilityError(CmeError, NotImplementedError):
    """The requested prior/order combination is not supported."""


class NumericError(CmeError, ArithmeticError):
    """A numerical procedure failed (underflow, non-convergence)."""


class ScheduleError(CmeError, ValueError):
    """An empirical-Bayes parameter schedule is not admissible."""
