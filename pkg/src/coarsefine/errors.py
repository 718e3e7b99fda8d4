class TrackingError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(TrackingError, ValueError):
    pass


class OutOfBoundsError(InvalidInputError):
    """A requested region does not intersect the frame at all."""


class BackendError(TrackingError, RuntimeError):
    """A feature backend could not be loaded or failed during inference."""


class TrackerError(TrackingError, RuntimeError):
    """Contract violation inside the tracking loop (e.g. uninitialized state)."""


class FormatError(TrackingError, ValueError):
    """Malformed sequence directory, ground-truth file or config file."""
