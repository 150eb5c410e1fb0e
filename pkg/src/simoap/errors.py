"""Exception types shared across the pipeline."""


class ValidationError(ValueError):
    """Input violates a documented precondition or invariant."""


class DatasetError(ValidationError):
    """Dataset file is malformed or inconsistent."""


class ProtocolError(RuntimeError):
    """A backend payload violates the wire protocol contract."""


class TransportError(RuntimeError):
    """A backend call failed after exhausting retries."""

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


class CapabilityError(RuntimeError):
    """The backend does not advertise the required capability."""


class AggregationError(RuntimeError):
    """A metric aggregation is undefined for the given inputs."""
