"""Exception hierarchy shared across the package."""


class RaluError(Exception):
    """Base class for every error raised by this package."""
