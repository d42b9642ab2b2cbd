class MomoLabError(Exception):
    """Base class for errors raised by momo_lab."""


class CapacityError(MomoLabError):
    """Requested table would exceed the configured memory budget."""


class HorizonError(MomoLabError, IndexError):
    """Query outside the range a table, set or system was built for."""


class DomainError(MomoLabError, ValueError):
    """Argument outside the mathematical domain of an operation."""
