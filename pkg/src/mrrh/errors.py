"""Exception types raised across the package."""


class MRRHError(Exception):
    """Base class for all package errors."""


class InvalidConfigError(MRRHError, ValueError):
    """A configuration parameter is out of its allowed range."""


class InvalidInputError(MRRHError, ValueError):
    """An argument to an operation violates its precondition."""


class ClosedChannelError(MRRHError):
    """A channel was queried on a node whose level does not open it."""
