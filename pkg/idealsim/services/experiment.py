"""Experiment files: JSON parsing and problem assembly"""

import json
import logging
from pathlib import Path
from typing import List

from pydantic import ValidationError

from idealsim.exceptions import ConfigError, MixingMatrixError
from idealsim.models.configs import AlgorithmConfig, ExperimentConfig
from idealsim.models.graphs import MixingMatrix, NetworkGraph
from idealsim.models.objectives import GlobalObjective
from idealsim.services import datasets, topology
from idealsim.services.schedules import Problem, build_problem

logger = logging.getLogger(__name__)


def _field_path(error: dict) -> str:
    return ".".join(str(part) for part in error["loc"])


def parse_experiment(document: dict, base_dir=None) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(
            document, context={"base_dir": base_dir}
        )
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(first["msg"], field=_field_path(first)) from e


def load_experiment(path) -> ExperimentConfig:
    """Read an experiment file; relative paths resolve against its folder"""
    path = Path(path)
    try:
        document = json.loads(path.read_text())
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(
            f"{path} is not valid JSON: {e.msg} at line {e.lineno}"
        ) from e
    if not isinstance(document, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return parse_experiment(document, base_dir=path.parent)


def build_graph(config: ExperimentConfig) -> NetworkGraph:
    if config.graph.kind == "custom":
        graph = topology.load_edge_list(config.graph.edges_file)
        if config.graph.n is not None and config.graph.n != graph.n:
            raise ConfigError(
                f"edge list has {graph.n} agents, config says "
                f"{config.graph.n}",
                field="graph.n",
            )
        return graph
    return topology.build_graph(config.graph.kind, config.graph.n)


def build_mixing(
    config: ExperimentConfig, graph: NetworkGraph
) -> MixingMatrix:
    source = config.mixing.source
    if source == "laplacian":
        return topology.laplacian(graph)
    if source == "metropolis":
        return topology.from_doubly_stochastic(
            topology.metropolis_weights(graph), graph
        )
    mixing = topology.load_matrix(config.mixing.matrix_file, graph)
    report = topology.validate(mixing)
    if not report.passed:
        failed = ", ".join(check.name for check in report.failures())
        raise MixingMatrixError(
            f"{config.mixing.matrix_file} fails the mixing checks: {failed}"
        )
    return mixing


def build_objective(config: ExperimentConfig, n: int) -> GlobalObjective:
    dataset = config.dataset
    seed = config.seed if dataset.seed is None else dataset.seed
    if dataset.kind == "synthetic-quadratic":
        return GlobalObjective(
            datasets.synthesize_quadratics(seed, n, dataset.d, dataset.kappa)
        )
    if dataset.kind == "synthetic-logistic":
        data = datasets.synthesize_dataset(
            seed, dataset.m, dataset.d, dataset.separation
        )
    else:
        data = datasets.load_dataset(dataset.path, dataset.format)
    return GlobalObjective(
        datasets.partition(data, n, dataset.partition, config.mu)
    )


def build_experiment(config: ExperimentConfig) -> Problem:
    """Graph, mixing matrix, local losses and the reference optimum"""
    graph = build_graph(config)
    mixing = build_mixing(config, graph)
    objective = build_objective(config, graph.n)
    logger.info(
        "Built %s graph with %d agents, %s mixing, kappa_f=%.4g",
        graph.kind,
        graph.n,
        mixing.source,
        objective.kappa_f,
    )
    return build_problem(objective, mixing, config.reference_tol)


def algorithm_configs(config: ExperimentConfig) -> List[AlgorithmConfig]:
    """Algorithm list with the experiment-wide outer cap filled in"""
    return [
        algorithm.model_copy(
            update={"max_outer": algorithm.max_outer or config.max_outer}
        )
        for algorithm in config.algorithms
    ]
