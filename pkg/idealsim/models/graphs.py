from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, List, Optional, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict

from idealsim.exceptions import MixingMatrixError, TopologyError

Edge = Tuple[int, int]


def _normalize_edges(n: int, edges: Iterable[Edge]) -> FrozenSet[Edge]:
    normalized = set()
    for i, j in edges:
        i, j = int(i), int(j)
        if i == j:
            raise TopologyError(f"self-loop ({i},{j}) is not an edge")
        if not (0 <= i < n and 0 <= j < n):
            raise TopologyError(f"edge ({i},{j}) outside agents 0..{n - 1}")
        normalized.add((min(i, j), max(i, j)))
    return frozenset(normalized)


@dataclass(frozen=True)
class NetworkGraph:
    """Undirected communication graph over agents 0..n-1"""

    n: int
    edges: FrozenSet[Edge]
    kind: str = "custom"

    def __post_init__(self):
        if self.n < 2:
            raise TopologyError(
                f"a network needs at least 2 agents, got {self.n}"
            )
        object.__setattr__(self, "edges", _normalize_edges(self.n, self.edges))

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def neighbors(self, i: int) -> List[int]:
        found = [b if a == i else a for a, b in self.edges if i in (a, b)]
        return sorted(found)

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n))
        graph.add_edges_from(sorted(self.edges))
        return graph

    def is_connected(self) -> bool:
        return nx.is_connected(self.to_networkx())


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    """Symmetric PSD gossip matrix W with Ker(W) = span(1).

    ``averaging`` keeps the doubly-stochastic matrix a W was derived from so
    averaging-based baselines reuse it verbatim.
    """

    entries: np.ndarray
    source: str
    graph: Optional[NetworkGraph] = None
    averaging: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise MixingMatrixError(
                f"mixing matrix must be square, got {entries.shape}"
            )
        if self.graph is not None and self.graph.n != entries.shape[0]:
            raise MixingMatrixError(
                f"matrix is {entries.shape[0]}x{entries.shape[0]} but the "
                f"graph has {self.graph.n} agents"
            )
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        if self.averaging is not None:
            averaging = np.array(self.averaging, dtype=float)
            averaging.setflags(write=False)
            object.__setattr__(self, "averaging", averaging)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


class SpectralSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    lambda_max: float
    lambda_min_plus: float
    kappa: float
    eigenvalues: List[float]


class CheckResult(BaseModel):
    name: str
    passed: bool
    residual: float
    detail: str = ""


class ValidationReport(BaseModel):
    """Outcome of checking a matrix against the mixing-matrix assumptions"""

    source: str
    n: int
    checks: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]
