"""Common exception hierarchy."""


class GenqmError(Exception):
    """Base class for all errors raised by this package."""
