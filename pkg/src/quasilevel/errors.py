"""Exception hierarchy shared by the library and the command-line front end."""


class QuasilevelError(Exception):
    """Base class for all errors raised by quasilevel."""


class ConfigError(QuasilevelError, ValueError):
    """Malformed potential spec or experiment configuration."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class ResourceCapError(QuasilevelError, MemoryError):
    """A grid or search would exceed the configured resource cap."""


class BracketInvalid(QuasilevelError, ValueError):
    """Bisection bracket does not satisfy its preconditions."""


class ShiftNotFound(QuasilevelError, LookupError):
    """The lattice walk exhausted its budget without a hit.

    This is a budget outcome only; it says nothing about existence.
    """

    def __init__(self, message, steps):
        super().__init__(message)
        self.steps = steps
