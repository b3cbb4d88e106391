"""Exception types shared across the package."""


class HsisegError(Exception):
    """Base class for all anticipated errors (bad inputs, bad files, bad state).

    The CLI maps these to exit code 2; unexpected exceptions exit 1.
    """


class FormatError(HsisegError):
    """A file on disk does not match its expected format."""


class ValidationError(HsisegError):
    """An in-memory value violates a documented invariant or precondition."""
