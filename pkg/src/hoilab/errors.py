"""Exception types shared across the package."""


class HoilabError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(HoilabError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateBoxError(InvalidArgumentError):
    """A box collapsed to zero width or height after clamping."""


class EmptyKeysError(InvalidArgumentError):
    """Attention was asked to attend over zero keys."""


class InvalidStateError(HoilabError, RuntimeError):
    """An object reached a state that violates its invariants."""


class NonFiniteError(HoilabError, RuntimeError):
    """A computation produced NaN or infinity."""


class GenerationError(HoilabError, RuntimeError):
    """Scene synthesis could not satisfy placement constraints."""


class ParseError(HoilabError, ValueError):
    """A file could not be parsed.

    ``offset`` holds the byte offset of the failure when known, ``line``
    the 1-based line number for line-oriented formats.
    """

    def __init__(self, message, offset=None, line=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.offset = offset
        self.line = line


class ConfigError(HoilabError, ValueError):
    """A run configuration is malformed or inconsistent."""


class DigestMismatchError(HoilabError, RuntimeError):
    """An artifact was produced under a different configuration."""
