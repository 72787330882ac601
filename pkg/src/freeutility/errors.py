"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Malformed input: bad shapes, invalid indices, non-normalized tables."""


class ZeroProbabilityError(ValueError):
    """Conditioning on an event of probability zero."""


class DegenerateError(ValueError):
    """No admissible distribution exists (all mass annihilated)."""


class ParameterError(ValueError):
    """Out-of-range scalar parameter, e.g. a non-positive temperature."""


class CapacityError(RuntimeError):
    """Problem too large for exact enumeration."""

    def __init__(self, message, size=None, limit=None):
        super().__init__(message)
        self.size = size
        self.limit = limit
