"""Exception types shared across the package."""


class PrefrlError(Exception):
    """Base class for all package errors."""


class DimensionError(PrefrlError):
    """Operand shapes are incompatible."""


class ContractError(PrefrlError):
    """A documented precondition or invariant was violated by the caller."""


class NotReadyError(PrefrlError):
    """Not enough data collected yet to satisfy the request."""


class ConflictError(PrefrlError):
    """A query id was answered more than once."""


class UnknownQueryError(PrefrlError):
    """An answer referenced a query id that was never issued."""
