import logging
import math
from typing import Tuple

import numpy as np

from idealsim.exceptions import ConvergenceError, ObjectiveError
from idealsim.models.blocks import BlockVector
from idealsim.models.objectives import GlobalObjective, LocalObjective

logger = logging.getLogger(__name__)


def local_value(f: LocalObjective, x: np.ndarray) -> float:
    return f.value(x)


def local_grad(f: LocalObjective, x: np.ndarray) -> np.ndarray:
    return f.grad(x)


def global_value(F: GlobalObjective, X: BlockVector) -> float:
    return F.value(X.data)


def global_grad(F: GlobalObjective, X: BlockVector) -> BlockVector:
    return BlockVector(F.grad(X.data))


def suboptimality(
    F: GlobalObjective, X: BlockVector, f_star: float
) -> float:
    """f(consensus mean of X) - f(x*), clamped at zero"""
    value = F.centralized_value(X.data.mean(axis=0)) - f_star
    return max(value, 0.0)


def reference_solution(
    F: GlobalObjective, tol: float = 1e-10, max_iterations: int = 1_000_000
) -> Tuple[np.ndarray, float]:
    """Centralized Nesterov descent on f = sum_i f_i until ||grad f|| <= tol"""
    if F.mu <= 0:
        raise ObjectiveError("reference solution needs mu > 0")
    smoothness = sum(f.smoothness for f in F.locals)
    convexity = sum(f.strong_convexity for f in F.locals)
    root = math.sqrt(smoothness / convexity)
    momentum = (root - 1.0) / (root + 1.0)
    x = np.zeros(F.d)
    y = x
    for iteration in range(max_iterations):
        gradient = F.centralized_grad(x)
        if np.linalg.norm(gradient) <= tol:
            logger.debug(
                "Reference solution after %d iterations", iteration
            )
            return x, F.centralized_value(x)
        next_x = y - F.centralized_grad(y) / smoothness
        y = next_x + momentum * (next_x - x)
        x = next_x
    raise ConvergenceError(
        f"reference solver did not reach ||grad f|| <= {tol:.1e} in "
        f"{max_iterations} iterations"
    )
