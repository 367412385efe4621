"""Exception hierarchy shared by every bidlab module."""


class BidlabError(Exception):
    """Base class for all toolkit errors."""


class InputError(BidlabError, ValueError):
    """Malformed or inconsistent input data."""


class InvalidCodeError(InputError):
    pass


class EmptyMatrixError(InputError):
    pass


class LengthMismatchError(InputError):
    pass


class UnknownNodeError(InputError, KeyError):
    pass


class NumericalError(BidlabError, ArithmeticError):
    """A computation is undefined for the given data (zero variance, empty group...)."""
