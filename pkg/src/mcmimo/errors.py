"""Exception types raised by the simulation engine."""


class SimulationError(Exception):
    """Base class for all engine-specific failures."""


class GeometryError(SimulationError, ValueError):
    """Degenerate geometry, e.g. a user placed exactly on a base station."""


class PilotReuseError(SimulationError, ValueError):
    """Unsupported pilot reuse factor or inconsistent pilot allocation."""


class PowerControlError(SimulationError, ValueError):
    """Power control cannot be applied, e.g. zero serving-link fading."""


class EstimationConsistencyError(SimulationError, ValueError):
    """Estimator inputs are inconsistent (negative error variance)."""


class DetectorRankError(SimulationError, ValueError):
    """A detector requires more antennas or a better-conditioned system."""


class SingularSystemError(SimulationError, RuntimeError):
    """A linear system in the fixed-point machinery is singular."""

    def __init__(self, message: str, condition_estimate: float = float("inf")):
        super().__init__(message)
        self.condition_estimate = condition_estimate


class FixedPointDivergenceError(SimulationError, RuntimeError):
    """A fixed-point iteration failed to reach the requested tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
