from pathlib import Path
from typing import List, Literal, Optional

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationInfo,
    field_validator,
    model_validator,
)

Algorithm = Literal[
    "dgd", "al", "acc-al", "ideal", "mideal", "extra", "ssda", "msda"
]
InnerSolver = Literal["gd", "agd", "sgd", "exact"]

# Algorithms whose metric is the Chebyshev-accelerated Q(W).
CHEBYSHEV_ALGORITHMS = ("mideal", "msda")
# Algorithms that pin rho to zero.
ZERO_RHO_ALGORITHMS = ("ssda", "msda")


class StoppingSection(BaseModel):
    """Inner-loop stopping: Option I (accuracy) or Option II (budget)"""

    model_config = ConfigDict(extra="forbid")

    option: Literal["I", "II"] = "II"
    t_inner: Optional[int] = Field(default=100, ge=1)
    multiplier: float = Field(default=1.0, gt=0)
    sigma_sq: float = Field(default=1.0, gt=0)


class AlgorithmConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    algorithm: Algorithm
    label: Optional[str] = None
    inner_solver: InnerSolver = "agd"
    stopping: StoppingSection = Field(default_factory=StoppingSection)
    rho: Optional[float] = Field(default=None, ge=0)
    rho_scale: float = Field(default=1.0, gt=0)
    eta: Optional[float] = Field(default=None, ge=0)
    dual_step: Literal["theory", "rho"] = "theory"
    beta_outer: Optional[float] = Field(default=None, ge=0, lt=1)
    beta_inner: Optional[float] = Field(default=None, ge=0, lt=1)
    inner_step: Optional[float] = Field(default=None, gt=0)
    max_outer: Optional[int] = Field(default=None, ge=1)
    max_inner: int = Field(default=100_000, ge=1)
    epsilon: float = Field(default=1e-6, gt=0)
    exact_tol: float = Field(default=1e-10, gt=0)
    delta_dual: Optional[float] = Field(default=None, gt=0)
    seed: int = Field(default=0, ge=0)
    execution: Literal["matrix", "per-agent"] = "matrix"
    record_iterates: bool = False

    @property
    def name(self) -> str:
        return self.label or self.algorithm

    @property
    def uses_chebyshev(self) -> bool:
        return self.algorithm in CHEBYSHEV_ALGORITHMS


class CostModel(BaseModel):
    """One gradient round costs 1, one mixing round costs tau"""

    model_config = ConfigDict(frozen=True)

    tau: float = Field(ge=0)

    def time(self, grad_rounds: int, mixing_rounds: int) -> float:
        return grad_rounds + self.tau * mixing_rounds


def _resolve(path: Optional[str], info: ValidationInfo) -> Optional[str]:
    if path is None:
        return None
    base = (info.context or {}).get("base_dir")
    resolved = Path(path)
    if not resolved.is_absolute() and base is not None:
        resolved = Path(base) / resolved
    if not resolved.exists():
        raise ValueError(f"file {resolved} does not exist")
    return str(resolved)


class GraphSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["cycle", "path", "complete", "barbell", "custom"]
    n: Optional[int] = Field(default=None, ge=2)
    edges_file: Optional[str] = None

    @field_validator("edges_file")
    @classmethod
    def edges_file_exists(cls, value, info: ValidationInfo):
        return _resolve(value, info)

    @model_validator(mode="after")
    def source_present(self):
        if self.kind == "custom" and self.edges_file is None:
            raise ValueError("custom graphs need edges_file")
        if self.kind != "custom" and self.n is None:
            raise ValueError(f"graph kind {self.kind} needs n")
        return self


class MixingSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    source: Literal["laplacian", "metropolis", "custom"] = "laplacian"
    matrix_file: Optional[str] = None

    @field_validator("matrix_file")
    @classmethod
    def matrix_file_exists(cls, value, info: ValidationInfo):
        return _resolve(value, info)

    @model_validator(mode="after")
    def matrix_present(self):
        if self.source == "custom" and self.matrix_file is None:
            raise ValueError("custom mixing needs matrix_file")
        return self


class DatasetSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["synthetic-logistic", "synthetic-quadratic", "file"]
    path: Optional[str] = None
    format: Literal["csv", "libsvm"] = "csv"
    m: int = Field(default=200, ge=1)
    d: int = Field(default=10, ge=1)
    separation: float = Field(default=1.0, ge=0)
    kappa: float = Field(default=10.0, ge=1)
    partition: Literal["contiguous", "round-robin"] = "contiguous"
    seed: Optional[int] = Field(default=None, ge=0)

    @field_validator("path")
    @classmethod
    def path_exists(cls, value, info: ValidationInfo):
        return _resolve(value, info)

    @model_validator(mode="after")
    def path_present(self):
        if self.kind == "file" and self.path is None:
            raise ValueError("file datasets need path")
        return self


class ExperimentConfig(BaseModel):
    """A full experiment: network, data, algorithms and the tau sweep"""

    model_config = ConfigDict(extra="forbid")

    graph: GraphSection
    mixing: MixingSection = Field(default_factory=MixingSection)
    dataset: DatasetSection
    mu: float = Field(default=1e-3, gt=0)
    algorithms: List[AlgorithmConfig] = Field(min_length=1)
    taus: List[float] = Field(min_length=1)
    target: float = Field(default=1e-5, gt=0)
    max_outer: int = Field(default=500, ge=1)
    reference_tol: float = Field(default=1e-10, gt=0)
    output_dir: str = "results"
    seed: int = Field(default=0, ge=0)

    @field_validator("taus")
    @classmethod
    def taus_nonnegative(cls, value: List[float]):
        if any(tau < 0 for tau in value):
            raise ValueError("tau values must be >= 0")
        return value

    @model_validator(mode="after")
    def labels_unique(self):
        names = [algorithm.name for algorithm in self.algorithms]
        duplicates = sorted({name for name in names if names.count(name) > 1})
        if duplicates:
            raise ValueError(
                f"algorithm labels must be unique, repeated: {duplicates}"
            )
        return self
