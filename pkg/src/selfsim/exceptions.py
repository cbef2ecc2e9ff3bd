"""Exception hierarchy shared by all modules."""


class SelfSimError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(SelfSimError, ValueError):
    """Malformed or mathematically inadmissible input."""


class HullViolationError(InvalidInputError):
    """A map does not send the bounding ball into itself."""

    def __init__(self, message, map_index=None):
        super().__init__(message)
        self.map_index = map_index


class ResourceError(SelfSimError):
    """A computation would exceed a configured size or depth cap."""

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


class InconsistencyError(SelfSimError):
    """An internal postcondition was violated."""
