"""Exception types raised by the simulator."""


class SimulationError(RuntimeError):
    """Numerical failure inside one of the pipeline stages."""


class ConvergenceError(SimulationError):
    """An iterative procedure stopped before reaching its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class InstabilityError(SimulationError):
    """The ion crystal is not a stable linear chain."""


class GaplessError(SimulationError):
    """A band quantity was requested for a gapless spectrum."""


class LocalizedError(SimulationError):
    """No spreading front could be found because the excitation stays put."""


class ConfigError(ValueError):
    """Invalid user input (scenario, dimensions, ranges)."""
