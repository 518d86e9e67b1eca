"""Exception types shared across the package."""


class EpieconError(Exception):
    """Base class for all package errors."""


class DataFormatError(EpieconError, ValueError):
    """A data file is malformed (missing column, unparseable layout)."""


class DateOrderError(EpieconError, ValueError):
    """Dates are not strictly increasing / contain duplicates."""


class DomainError(EpieconError, ValueError):
    """An argument violates an operation's precondition."""


class RangeError(EpieconError, ValueError):
    """A requested date range is empty or not covered by the data."""


class WindowError(EpieconError, ValueError):
    """An input history window is incomplete."""


class ShapeError(EpieconError, ValueError):
    """Array shapes are inconsistent."""


class NumericError(EpieconError, ArithmeticError):
    """A numeric computation produced NaN/inf values."""


class StabilityError(EpieconError, ArithmeticError):
    """Compartment dynamics left the valid [0, 1] region."""

    def __init__(self, message, last_state=None, trajectory=None):
        super().__init__(message)
        self.last_state = last_state
        self.trajectory = trajectory


class BracketError(EpieconError, ValueError):
    """A scalar root solve could not bracket the target."""
