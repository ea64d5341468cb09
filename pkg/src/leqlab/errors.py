"""Exception hierarchy shared across the package."""


class LeqLabError(Exception):
    """Base class for all package errors."""


class ConfigParseError(LeqLabError):
    """Configuration document is malformed or contains unknown fields."""


class ValidationError(LeqLabError):
    """A problem invariant is violated; message names the offending field."""


class NonFiniteValue(LeqLabError):
    """A computed quantity is inf or NaN where a finite value is required."""


class BlowUpBeforeTerminal(LeqLabError):
    """Backward integration escaped within the first step from the terminal time.

    Carries ``eta``, the measured backward existence span (0 for a
    pathological instance that escapes immediately).
    """

    def __init__(self, message: str, eta: float = 0.0):
        super().__init__(message)
        self.eta = eta


class MissingPrerequisite(LeqLabError):
    """An operation was called with an absent or truncated prerequisite."""


class GridMismatch(LeqLabError):
    """Requested time step is incompatible with the horizon or solver grid."""


class AllPathsOverflowed(LeqLabError):
    """Every simulated path overflowed; no cost estimate can be formed."""
