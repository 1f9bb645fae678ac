import json

import numpy as np
import pytest

from idealsim.services import topology

from problems import logistic_problem, quadratic_problem


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def cycle4():
    return topology.laplacian(topology.build_graph("cycle", 4))


@pytest.fixture(scope="module")
def quadratic():
    return quadratic_problem()


@pytest.fixture(scope="module")
def small_logistic():
    return logistic_problem(n=4, m=40, d=3, mu=1e-2)


@pytest.fixture
def write_config(tmp_path):
    """Write an experiment document to tmp_path and return its path"""

    def write(document, name="experiment.json"):
        path = tmp_path / name
        path.write_text(json.dumps(document))
        return path

    return write


@pytest.fixture
def minimal_document():
    return {
        "graph": {"kind": "cycle", "n": 4},
        "dataset": {"kind": "synthetic-quadratic", "d": 2, "kappa": 5},
        "algorithms": [
            {
                "algorithm": "ideal",
                "stopping": {"t_inner": 10},
                "max_outer": 30,
            }
        ],
        "taus": [1.0],
        "target": 1e-8,
        "seed": 7,
    }
