"""Inner solvers for the augmented-Lagrangian subproblem

    P(X) = F(X) + <Omega, X> + (rho / 2) ||X||_M^2

Each solver is warm-started by the caller and returns the final iterate
together with a SolverReport whose counts feed the simulator's time model.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from idealsim.exceptions import (
    ConvergenceError,
    DivergenceError,
    ShapeMismatchError,
)
from idealsim.models.blocks import BlockVector
from idealsim.models.objectives import GlobalObjective, QuadraticObjective
from idealsim.models.records import SolverReport, StoppingRule
from idealsim.services.blockspace import MetricOperator

logger = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 1e12

Seed = Union[int, Sequence[int]]


@dataclass(frozen=True)
class Subproblem:
    objective: GlobalObjective
    omega: BlockVector
    rho: float
    metric: MetricOperator

    def __post_init__(self):
        self.omega.require_shape(self.objective.n, self.objective.d)
        if self.metric.n != self.objective.n:
            raise ShapeMismatchError(
                f"metric over {self.metric.n} agents, objective over "
                f"{self.objective.n}"
            )
        if self.rho < 0:
            raise ValueError(f"rho must be >= 0, got {self.rho}")

    @property
    def smoothness(self) -> float:
        return self.objective.L + self.rho * self.metric.lambda_max

    @property
    def strong_convexity(self) -> float:
        return self.objective.mu

    @property
    def kappa(self) -> float:
        return self.smoothness / self.strong_convexity


def _grad(p: Subproblem, X: np.ndarray) -> np.ndarray:
    return p.objective.grad(X) + p.omega.data + p.rho * p.metric.apply(X)


def _value(p: Subproblem, X: np.ndarray) -> float:
    regularizer = float(np.sum(X * p.metric.apply(X)))
    return (
        p.objective.value(X)
        + float(np.sum(p.omega.data * X))
        + 0.5 * p.rho * regularizer
    )


def subproblem_grad(p: Subproblem, x: BlockVector) -> BlockVector:
    """grad F(X) + Omega + rho M X, one metric application"""
    x.require_shape(p.objective.n, p.objective.d)
    return BlockVector(_grad(p, x.data))


def subproblem_value(p: Subproblem, x: BlockVector) -> float:
    x.require_shape(p.objective.n, p.objective.d)
    return _value(p, x.data)


class _DivergenceGuard:
    def __init__(self, x0: np.ndarray):
        self.limit = DIVERGENCE_FACTOR * max(np.linalg.norm(x0), 1.0)

    def check(self, x: np.ndarray, iteration: int):
        norm = np.linalg.norm(x)
        if not np.isfinite(norm) or norm > self.limit:
            raise DivergenceError(
                f"inner iterate norm {norm:.3e} exceeded {self.limit:.3e} "
                f"at iteration {iteration}"
            )


def _done(stop: StoppingRule, x: np.ndarray, iteration: int) -> bool:
    if stop.option == "II":
        return iteration >= stop.t_inner
    if stop.reference is None or stop.epsilon is None:
        raise ValueError("Option I needs epsilon and a reference solution")
    if float(np.sum((x - stop.reference) ** 2)) <= stop.epsilon:
        return True
    if iteration >= stop.max_iterations:
        raise ConvergenceError(
            f"Option I accuracy {stop.epsilon:.3e} not reached in "
            f"{stop.max_iterations} inner iterations"
        )
    return False


def _report(
    p: Subproblem, x: np.ndarray, iterations: int, grad_evals: int
) -> SolverReport:
    return SolverReport(
        iterations=iterations,
        grad_evals=grad_evals,
        mixing_rounds=iterations * p.metric.rounds + 1,
        grad_norm=float(np.linalg.norm(_grad(p, x))),
    )


def gd_solve(
    p: Subproblem,
    x0: BlockVector,
    stop: StoppingRule,
    step: Optional[float] = None,
) -> Tuple[BlockVector, SolverReport]:
    x0.require_shape(p.objective.n, p.objective.d)
    step = 1.0 / p.smoothness if step is None else step
    x = x0.data
    guard = _DivergenceGuard(x)
    iteration = 0
    while not _done(stop, x, iteration):
        x = x - step * _grad(p, x)
        iteration += 1
        guard.check(x, iteration)
    return BlockVector(x), _report(p, x, iteration, iteration)


def agd_solve(
    p: Subproblem,
    x0: BlockVector,
    stop: StoppingRule,
    beta: Optional[float] = None,
    track: bool = False,
) -> Tuple[BlockVector, SolverReport]:
    """Nesterov's method with constant momentum for strongly convex P"""
    x0.require_shape(p.objective.n, p.objective.d)
    if beta is None:
        root = math.sqrt(p.kappa)
        beta = (root - 1.0) / (root + 1.0)
    step = 1.0 / p.smoothness
    x = y = x0.data
    guard = _DivergenceGuard(x)
    history = [] if track else None
    iteration = 0
    while not _done(stop, x, iteration):
        # Gradient step from the extrapolated point, then momentum
        next_x = y - step * _grad(p, y)
        y = next_x + beta * (next_x - x)
        x = next_x
        iteration += 1
        guard.check(x, iteration)
        if track:
            history.append(float(np.linalg.norm(_grad(p, x))))
    report = _report(p, x, iteration, iteration)
    if track:
        report = SolverReport(
            iterations=report.iterations,
            grad_evals=report.grad_evals,
            mixing_rounds=report.mixing_rounds,
            grad_norm=report.grad_norm,
            grad_norm_history=history,
        )
    return BlockVector(x), report


def sgd_solve(
    p: Subproblem, x0: BlockVector, stop: StoppingRule, seed: Seed
) -> Tuple[BlockVector, SolverReport]:
    """One sampled data point per agent per step, step 1/(mu (t + t0))"""
    x0.require_shape(p.objective.n, p.objective.d)
    rng = np.random.default_rng(seed)
    sizes = np.array([f.n_samples for f in p.objective.locals])
    offset = math.ceil(p.smoothness / p.strong_convexity)
    x = x0.data
    guard = _DivergenceGuard(x)
    iteration = 0
    while not _done(stop, x, iteration):
        # One data point per agent, the penalty terms stay exact
        picks = rng.integers(0, sizes)
        sampled = np.stack(
            [
                f.sample_grad(row, int(j))
                for f, row, j in zip(p.objective.locals, x, picks)
            ]
        )
        gradient = sampled + p.omega.data + p.rho * p.metric.apply(x)
        step = 1.0 / (p.strong_convexity * (iteration + offset))
        x = x - step * gradient
        iteration += 1
        guard.check(x, iteration)
    return BlockVector(x), _report(p, x, iteration, iteration)


def _solve_quadratic(
    p: Subproblem, x0: np.ndarray, tol: float, max_iterations: int
) -> Tuple[np.ndarray, int]:
    n, d = p.objective.n, p.objective.d
    hessians = [f.hessian for f in p.objective.locals]
    linear = np.stack([f.linear for f in p.objective.locals])

    # Block-diagonal Hessian plus rho M, on the flattened (n*d,) space
    def matvec(vector):
        X = vector.reshape(n, d)
        curvature = np.stack([H @ x for H, x in zip(hessians, X)])
        return (curvature + p.rho * p.metric.apply(X)).ravel()

    operator = LinearOperator((n * d, n * d), matvec=matvec, dtype=float)
    # grad P = H X - b + Omega + rho M X, so solve (H + rho M) X = b - Omega
    rhs = (linear - p.omega.data).ravel()
    steps = []
    solution, info = cg(
        operator,
        rhs,
        x0=x0.ravel(),
        rtol=0.0,
        atol=tol,
        maxiter=max_iterations,
        callback=lambda _: steps.append(None),
    )
    if info != 0:
        raise ConvergenceError(
            f"conjugate gradients stopped with info={info} before "
            f"residual {tol:.1e}"
        )
    return solution.reshape(n, d), len(steps)


def exact_solve_with_report(
    p: Subproblem,
    tol: float,
    x0: Optional[BlockVector] = None,
    max_iterations: int = 100_000,
) -> Tuple[BlockVector, SolverReport]:
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    n, d = p.objective.n, p.objective.d
    start = np.zeros((n, d)) if x0 is None else x0.require_shape(n, d).data
    # CG for quadratics, AGD on the gradient norm otherwise
    if all(isinstance(f, QuadraticObjective) for f in p.objective.locals):
        x, iterations = _solve_quadratic(p, start, tol, max_iterations)
        return BlockVector(x), _report(p, x, iterations, iterations)
    root = math.sqrt(p.kappa)
    beta = (root - 1.0) / (root + 1.0)
    step = 1.0 / p.smoothness
    x = y = start
    for iteration in range(max_iterations):
        if np.linalg.norm(_grad(p, x)) <= tol:
            return BlockVector(x), _report(p, x, iteration, 2 * iteration)
        next_x = y - step * _grad(p, y)
        y = next_x + beta * (next_x - x)
        x = next_x
    raise ConvergenceError(
        f"exact solve did not reach ||grad P|| <= {tol:.1e} in "
        f"{max_iterations} iterations"
    )


def exact_solve(
    p: Subproblem,
    tol: float,
    x0: Optional[BlockVector] = None,
    max_iterations: int = 100_000,
) -> BlockVector:
    """Minimizer of P to gradient-norm tol (CG for quadratics, else AGD)"""
    x, _ = exact_solve_with_report(p, tol, x0, max_iterations)
    return x
