"""Exception types shared by the lab modules."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class NumericError(RuntimeError):
    """A numerical procedure failed to reach its tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ResolutionError(ValueError):
    """The grid is too coarse for the requested radius or ball."""


class PreconditionError(ValueError):
    """A documented precondition of an estimate does not hold."""


class IntegrationError(RuntimeError):
    """Trajectory integration stopped early (step size underflow)."""

    def __init__(self, message, t_last=None, y_last=None):
        super().__init__(message)
        self.t_last = t_last
        self.y_last = y_last


class CFLError(ValueError):
    """Time step exceeds the advective stability limit."""

    def __init__(self, message, suggested_dt):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class ExcludedZoneError(ValueError):
    """Evaluation point too close to a singular center."""


class CollisionError(RuntimeError):
    """Two vortex centers came closer than the grid can separate."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigError(ValueError):
    """Invalid experiment configuration."""
