class IdealSimError(Exception):
    """Base class for every error raised by idealsim"""


class ShapeMismatchError(IdealSimError, ValueError):
    """Block vectors or matrices with incompatible shapes"""


class TopologyError(IdealSimError):
    """Invalid graph request or malformed graph source"""


class MixingMatrixError(TopologyError):
    """Matrix violating the mixing-matrix assumptions"""


class ObjectiveError(IdealSimError):
    """Invalid local loss data or constants"""


class DatasetError(IdealSimError):
    """Unreadable or inconsistent dataset"""


class GossipError(IdealSimError):
    """Chebyshev constants producing a non-positive operator"""


class DualStateError(IdealSimError):
    """Dual variable outside the zero-column-sum subspace"""


class SolverError(IdealSimError):
    """Inner solver failure"""


class ConvergenceError(SolverError):
    """Iteration cap exceeded before the stopping rule was met"""


class DivergenceError(SolverError):
    """Iterates blew up or became non-finite"""


class ConfigError(IdealSimError):
    """Experiment or algorithm configuration rejected"""

    def __init__(self, message: str, field: str = ""):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class SimulationError(IdealSimError):
    """Simulation produced an unusable trace"""
