import math
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from idealsim.models.blocks import BlockVector


class ChebyshevPlan(BaseModel):
    """Constants of the accelerated gossip recurrence.

    ``enabled`` is False when kappa_W is 1: the polynomial degenerates and the
    metric falls back to W itself with one round per application.
    """

    model_config = ConfigDict(frozen=True)

    enabled: bool
    j_w: int
    c2: Optional[float] = None
    c3: Optional[float] = None
    coefficients: List[float]
    kappa_w: float
    lambda_min_plus: float

    @property
    def rounds(self) -> int:
        return self.j_w if self.enabled else 1


class ScheduleParams(BaseModel):
    """Moduli and outer-loop schedules of the accelerated framework"""

    model_config = ConfigDict(frozen=True)

    rho: float
    L: float
    mu: float
    lambda_max: float
    lambda_min_plus: float
    L_rho: float
    mu_rho: float
    kappa_rho: float
    C_rho: float
    eta: float
    beta: float
    delta_dual: float

    @property
    def rate(self) -> float:
        return 1.0 - 0.5 * math.sqrt(self.mu_rho / self.L_rho)

    def epsilon(self, k: int) -> float:
        """Inner accuracy required for the k-th subproblem"""
        scale = self.mu_rho / (2.0 * self.lambda_max)
        return scale * self.rate**k * self.delta_dual

    def envelope(self, k: int) -> float:
        """Upper bound on ||X_k - X*||^2 after k outer steps"""
        return self.C_rho * self.rate**k * self.delta_dual


@dataclass(frozen=True)
class StoppingRule:
    """Option I stops at ||X - X*_k||^2 <= epsilon, Option II after T steps"""

    option: str
    t_inner: Optional[int] = None
    epsilon: Optional[float] = None
    reference: Optional[np.ndarray] = field(default=None, repr=False)
    max_iterations: int = 100_000

    @classmethod
    def fixed(cls, t_inner: int) -> "StoppingRule":
        if t_inner < 1:
            raise ValueError(f"Option II needs T >= 1, got {t_inner}")
        return cls(option="II", t_inner=int(t_inner))

    @classmethod
    def accuracy(
        cls,
        epsilon: float,
        reference: Optional[np.ndarray],
        max_iterations: int = 100_000,
    ) -> "StoppingRule":
        return cls(
            option="I",
            epsilon=float(epsilon),
            reference=reference,
            max_iterations=max_iterations,
        )


@dataclass(frozen=True)
class SolverReport:
    iterations: int
    grad_evals: int
    mixing_rounds: int
    grad_norm: float
    grad_norm_history: Optional[List[float]] = None


@dataclass(frozen=True)
class OuterRecord:
    """Bookkeeping for one outer iteration (k = 0 is the initial point)"""

    k: int
    inner_iterations: int
    grad_evals: int
    mixing_rounds: int
    suboptimality: float
    consensus_gap: float
    dual_residual: float = 0.0
    dual_norm: float = 0.0
    warm_start_gap: Optional[float] = None
    epsilon: Optional[float] = None
    iterate: Optional[np.ndarray] = field(default=None, repr=False)


@dataclass
class RunState:
    """Iterates and history of one outer-loop run"""

    algorithm: str
    X: BlockVector
    Lambda: BlockVector
    Omega: BlockVector
    k: int = 0
    history: List[OuterRecord] = field(default_factory=list)
    schedule: Optional[ScheduleParams] = None
    metric: str = "W"
    rounds_per_metric: int = 1
    delta_dual_kind: str = ""
    stopped_early: bool = False

    def iterates(self) -> List[np.ndarray]:
        return [r.iterate for r in self.history if r.iterate is not None]


class TraceSample(NamedTuple):
    time: float
    suboptimality: float
    consensus_gap: float


@dataclass
class TimeTrace:
    samples: List[TraceSample] = field(default_factory=list)
    metadata: Dict[str, str] = field(default_factory=dict)
    run: Optional[RunState] = field(default=None, repr=False)

    def time_to_target(self, target: float) -> float:
        for sample in self.samples:
            if sample.suboptimality <= target:
                return sample.time
        return math.inf

    @property
    def final_suboptimality(self) -> float:
        return self.samples[-1].suboptimality if self.samples else math.inf

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            self.samples, columns=list(TraceSample._fields)
        )
