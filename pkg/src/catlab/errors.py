"""Exception types shared across the package."""


class CatlabError(Exception):
    """Base class for all package-specific errors."""


class NonFiniteMLEError(CatlabError):
    """The likelihood has no interior maximum (e.g. an all-correct pattern)."""


class EstimationError(CatlabError):
    """An estimator could not produce a usable ability estimate."""


class PoolExhaustedError(CatlabError):
    """No unadministered items remain in the bank."""


class BankFormatError(CatlabError):
    """An item-bank file could not be parsed or failed validation."""


class SessionStateError(CatlabError):
    """An operation was attempted in an invalid session phase or order."""


class ResponseConflictError(SessionStateError):
    """A response referenced an item that is not the outstanding one."""
