import argparse
import logging
from pathlib import Path
from typing import Optional

from idealsim.commands import EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_OK
from idealsim.exceptions import IdealSimError, MixingMatrixError
from idealsim.models.graphs import MixingMatrix, NetworkGraph
from idealsim.services import topology
from idealsim.services.gossip import effective_spectrum, plan

logger = logging.getLogger(__name__)


def load_graph(source: str) -> NetworkGraph:
    """'kind:n' for a named family, otherwise an edge-list file"""
    kind, sep, count = source.partition(":")
    if sep and kind in topology.GRAPH_KINDS:
        try:
            n = int(count)
        except ValueError:
            raise MixingMatrixError(f"bad agent count in {source!r}")
        return topology.build_graph(kind, n)
    return topology.load_edge_list(Path(source))


def load_source(
    source: Optional[str], matrix: Optional[str], mixing: str
) -> MixingMatrix:
    graph = load_graph(source) if source else None
    if matrix is not None:
        return topology.load_matrix(matrix, graph)
    if graph is None:
        raise MixingMatrixError("give a graph source or --matrix")
    if mixing == "metropolis":
        return topology.from_doubly_stochastic(
            topology.metropolis_weights(graph), graph
        )
    return topology.laplacian(graph)


def format_report(w: MixingMatrix) -> str:
    report = topology.validate(w)
    lines = [f"source: {report.source}, n = {report.n}"]
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        lines.append(
            f"  [{status}] {check.name:<14} residual={check.residual:.3e}"
            f"  {check.detail}"
        )
    if not report.passed:
        return "\n".join(lines)
    summary = topology.spectrum(w)
    lines.append(f"lambda_max      = {summary.lambda_max:.12g}")
    lines.append(f"lambda_min_plus = {summary.lambda_min_plus:.12g}")
    lines.append(f"kappa_W         = {summary.kappa:.12g}")
    chebyshev = plan(summary)
    accelerated = effective_spectrum(w, chebyshev)
    lines.append(f"j_W             = {chebyshev.rounds}")
    lines.append(f"kappa_Q(W)      = {accelerated.kappa:.12g}")
    return "\n".join(lines)


def cmd_validate(
    source: Optional[str],
    matrix: Optional[str] = None,
    mixing: str = "laplacian",
) -> int:
    """Print the mixing-matrix checks and spectral summary of a source"""
    try:
        w = load_source(source, matrix, mixing)
    except IdealSimError as e:
        print(f"cannot load {source or matrix}: {e}")
        return EXIT_CONFIG
    try:
        print(format_report(w))
    except IdealSimError as e:
        print(f"spectral analysis failed: {e}")
        return EXIT_CHECK_FAILED
    return EXIT_OK if topology.validate(w).passed else EXIT_CHECK_FAILED


def handle(args: argparse.Namespace) -> int:
    return cmd_validate(args.source, args.matrix, args.mixing)


def register(subparsers, common) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(
        "validate",
        parents=[common],
        help="check a graph or matrix as a mixing matrix",
    )
    parser.add_argument(
        "source", nargs="?", help="'kind:n' (e.g. cycle:4) or edge-list file"
    )
    parser.add_argument("--matrix", help="custom W (.npy or text)")
    parser.add_argument(
        "--mixing",
        choices=("laplacian", "metropolis"),
        default="laplacian",
        help="how W is built from a graph source",
    )
    parser.set_defaults(handler=handle)
    return parser
