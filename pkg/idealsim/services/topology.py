import logging
from pathlib import Path
from typing import Optional

import networkx as nx
import numpy as np
from scipy.linalg import eigvalsh

from idealsim.exceptions import MixingMatrixError, TopologyError
from idealsim.models.graphs import (
    CheckResult,
    MixingMatrix,
    NetworkGraph,
    SpectralSummary,
    ValidationReport,
)

logger = logging.getLogger(__name__)

GRAPH_KINDS = ("cycle", "path", "complete", "barbell")

# Relative to lambda_max for kernel and positivity checks.
TOL = 1e-9
STOCHASTIC_TOL = 1e-9


def build_graph(kind: str, n: int) -> NetworkGraph:
    """Deterministic connected graph of a named family"""
    if kind not in GRAPH_KINDS:
        raise TopologyError(
            f"unknown graph kind {kind!r}, expected one of {GRAPH_KINDS}"
        )
    if n < 2:
        raise TopologyError(f"{kind} graph needs n >= 2, got {n}")
    if kind == "cycle":
        graph = nx.cycle_graph(n)
    elif kind == "path":
        graph = nx.path_graph(n)
    elif kind == "complete":
        graph = nx.complete_graph(n)
    else:
        if n < 4 or n % 2:
            raise TopologyError(f"barbell graph needs even n >= 4, got {n}")
        # Cliques 0..n/2-1 and n/2..n-1, bridge (n/2 - 1, n/2).
        graph = nx.barbell_graph(n // 2, 0)
    return NetworkGraph(n=n, edges=frozenset(graph.edges()), kind=kind)


def load_edge_list(path) -> NetworkGraph:
    """Read "i j" lines (0-indexed, '#' comments) into a custom graph"""
    path = Path(path)
    if not path.exists():
        raise TopologyError(f"edge list {path} does not exist")
    try:
        graph = nx.read_edgelist(
            path, comments="#", nodetype=int, data=False
        )
    except (TypeError, ValueError) as e:
        raise TopologyError(f"malformed edge list {path}: {e}") from e
    if graph.number_of_edges() == 0:
        raise TopologyError(f"edge list {path} has no edges")
    n = max(graph.nodes()) + 1
    logger.debug(
        "Loaded %d edges over %d agents from %s", len(graph.edges), n, path
    )
    return NetworkGraph(n=n, edges=frozenset(graph.edges()), kind="custom")


def load_matrix(path, graph: Optional[NetworkGraph] = None) -> MixingMatrix:
    """Read a custom W from a .npy file or whitespace-separated text"""
    path = Path(path)
    try:
        if path.suffix == ".npy":
            entries = np.load(path)
        else:
            entries = np.loadtxt(path, ndmin=2)
    except (OSError, ValueError) as e:
        raise MixingMatrixError(f"cannot read matrix {path}: {e}") from e
    return MixingMatrix(entries=entries, source="custom", graph=graph)


def support_graph(entries: np.ndarray) -> NetworkGraph:
    """Graph whose edges are the nonzero off-diagonal entries"""
    n = entries.shape[0]
    rows, cols = np.nonzero(entries)
    edges = {(i, j) for i, j in zip(rows.tolist(), cols.tolist()) if i < j}
    return NetworkGraph(n=n, edges=frozenset(edges), kind="custom")


def laplacian(g: NetworkGraph) -> MixingMatrix:
    """Unit-weight Laplacian D - A"""
    if not g.is_connected():
        components = nx.number_connected_components(g.to_networkx())
        raise MixingMatrixError(
            f"graph is disconnected: kernel dimension {components} > 1"
        )
    entries = nx.laplacian_matrix(g.to_networkx(), nodelist=list(range(g.n)))
    return MixingMatrix(
        entries=entries.toarray().astype(float), source="laplacian", graph=g
    )


def metropolis_weights(g: NetworkGraph) -> np.ndarray:
    """Doubly-stochastic W_ij = 1 / (1 + max(deg_i, deg_j)) on edges"""
    degree = np.array([len(g.neighbors(i)) for i in range(g.n)])
    weights = np.zeros((g.n, g.n))
    for i, j in sorted(g.edges):
        weights[i, j] = weights[j, i] = 1.0 / (1 + max(degree[i], degree[j]))
    weights[np.diag_indices(g.n)] = 1.0 - weights.sum(axis=1)
    return weights


def from_doubly_stochastic(
    w_ds: np.ndarray, graph: Optional[NetworkGraph] = None
) -> MixingMatrix:
    """Mixing matrix I - W_DS from a symmetric doubly-stochastic W_DS"""
    w_ds = np.asarray(w_ds, dtype=float)
    if w_ds.ndim != 2 or w_ds.shape[0] != w_ds.shape[1]:
        raise MixingMatrixError(f"W_DS must be square, got {w_ds.shape}")
    n = w_ds.shape[0]
    if not np.array_equal(w_ds, w_ds.T):
        raise MixingMatrixError("W_DS must be symmetric")
    row_error = np.max(np.abs(w_ds.sum(axis=1) - 1.0))
    col_error = np.max(np.abs(w_ds.sum(axis=0) - 1.0))
    if max(row_error, col_error) > STOCHASTIC_TOL:
        raise MixingMatrixError(
            f"W_DS is not doubly stochastic: row residual {row_error:.2e}, "
            f"column residual {col_error:.2e}"
        )
    if graph is not None:
        off_support = _off_support(w_ds, graph)
        if off_support > 0:
            raise MixingMatrixError(
                f"W_DS has weight {off_support:.2e} outside the graph edges"
            )
    w = MixingMatrix(
        entries=np.eye(n) - w_ds,
        source="from-doubly-stochastic",
        graph=graph if graph is not None else support_graph(w_ds),
        averaging=w_ds,
    )
    eigenvalues = eigvalsh(w.entries)
    scale = max(abs(eigenvalues[0]), abs(eigenvalues[-1]), 1.0)
    if eigenvalues[0] < -TOL * scale:
        raise MixingMatrixError(
            f"I - W_DS is indefinite, smallest eigenvalue {eigenvalues[0]:.3e}"
        )
    _require_simple_kernel(eigenvalues)
    return w


def _off_support(entries: np.ndarray, graph: NetworkGraph) -> float:
    mask = np.ones(entries.shape, dtype=bool)
    np.fill_diagonal(mask, False)
    for i, j in graph.edges:
        mask[i, j] = mask[j, i] = False
    return float(np.max(np.abs(entries[mask]), initial=0.0))


def _require_simple_kernel(eigenvalues: np.ndarray):
    threshold = TOL * max(eigenvalues[-1], 0.0)
    kernel = int(np.sum(np.abs(eigenvalues) <= threshold))
    if kernel != 1:
        raise MixingMatrixError(
            f"kernel dimension {kernel} != 1 "
            f"(eigenvalues {np.round(eigenvalues[:3], 12).tolist()}...)"
        )


def spectrum(w: MixingMatrix) -> SpectralSummary:
    eigenvalues = eigvalsh(w.entries)
    lambda_max = float(eigenvalues[-1])
    if lambda_max <= 0:
        raise MixingMatrixError("mixing matrix has no positive eigenvalue")
    positive = eigenvalues[eigenvalues > TOL * lambda_max]
    if positive.size == 0:
        raise MixingMatrixError(
            f"no eigenvalue above {TOL * lambda_max:.2e}"
        )
    lambda_min_plus = float(positive[0])
    return SpectralSummary(
        lambda_max=lambda_max,
        lambda_min_plus=lambda_min_plus,
        kappa=lambda_max / lambda_min_plus,
        eigenvalues=eigenvalues.tolist(),
    )


def validate(w: MixingMatrix, tol: float = TOL) -> ValidationReport:
    """Check finiteness, symmetry, positivity, decentralization and the
    kernel. Failures are reported, never raised."""
    entries = w.entries
    bad = int(np.count_nonzero(~np.isfinite(entries)))
    finite = CheckResult(
        name="finite",
        passed=bad == 0,
        residual=float(bad),
        detail="number of NaN or infinite entries",
    )
    if bad:
        # The spectral checks need a finite matrix.
        return ValidationReport(source=w.source, n=w.n, checks=[finite])
    asymmetry = float(np.max(np.abs(entries - entries.T)))
    symmetric = (entries + entries.T) / 2.0
    eigenvalues = eigvalsh(symmetric)
    scale = float(max(np.max(np.abs(eigenvalues)), np.finfo(float).tiny))
    checks = [
        finite,
        CheckResult(
            name="symmetry",
            passed=asymmetry == 0.0,
            residual=asymmetry,
            detail="max |W - W^T|",
        ),
        CheckResult(
            name="positiveness",
            passed=bool(eigenvalues[0] >= -tol * scale),
            residual=float(-min(eigenvalues[0], 0.0)),
            detail=f"smallest eigenvalue {eigenvalues[0]:.3e}",
        ),
    ]
    if w.graph is None:
        checks.append(
            CheckResult(
                name="decentralized",
                passed=True,
                residual=0.0,
                detail="no graph attached, support defines the network",
            )
        )
    else:
        off_support = _off_support(entries, w.graph)
        checks.append(
            CheckResult(
                name="decentralized",
                passed=off_support == 0.0,
                residual=off_support,
                detail="max |W_ij| over non-edges",
            )
        )
    row_residual = float(np.max(np.abs(entries @ np.ones(w.n))))
    kernel = int(np.sum(np.abs(eigenvalues) <= tol * scale))
    checks.append(
        CheckResult(
            name="kernel",
            passed=row_residual <= tol * scale and kernel == 1,
            residual=row_residual,
            detail=f"||W 1||_inf, kernel dimension {kernel}",
        )
    )
    return ValidationReport(source=w.source, n=w.n, checks=checks)


def averaging_operator(w: MixingMatrix) -> np.ndarray:
    """Doubly-stochastic PSD W_DS used by DGD.

    Matrices built from a doubly-stochastic input return that input.
    Otherwise W_DS = I - gamma W / lambda_max, with gamma = 1 when the
    largest degree is at most lambda_max / 2, else shrunk so that every
    diagonal entry of W_DS stays at least 1/2.
    """
    if w.averaging is not None:
        return np.array(w.averaging)
    lambda_max = spectrum(w).lambda_max
    largest_diagonal = float(np.max(np.diag(w.entries)))
    gamma = min(1.0, lambda_max / (2.0 * largest_diagonal))
    if gamma < 1.0:
        logger.info("Averaging operator rescaled with gamma=%.4f", gamma)
    return np.eye(w.n) - gamma * np.asarray(w.entries) / lambda_max
