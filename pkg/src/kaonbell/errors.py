"""Exception hierarchy shared across the package."""


class KaonBellError(Exception):
    """Base class for all domain errors raised by this package."""


class DegenerateState(KaonBellError):
    """State norm is below the floor; every component has decayed away."""


class StateNotNormalized(KaonBellError):
    """Probabilities were requested for a state that is not unit norm."""


class InvalidSpec(KaonBellError):
    """A regenerator specification is incomplete or inconsistent."""


class InsufficientEvents(KaonBellError):
    """A Monte Carlo setting-pair bucket contains no events."""


class ConfigError(KaonBellError):
    """A run configuration failed to parse or validate."""

    def __init__(self, message: str, details: list[str] | None = None):
        super().__init__(message)
        self.details = details or []
