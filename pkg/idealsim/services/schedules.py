"""Parameter schedules and shared bookkeeping of the outer loop"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from idealsim.exceptions import ConfigError
from idealsim.models.blocks import BlockVector
from idealsim.models.configs import ZERO_RHO_ALGORITHMS, AlgorithmConfig
from idealsim.models.graphs import MixingMatrix, SpectralSummary
from idealsim.models.objectives import GlobalObjective
from idealsim.models.records import OuterRecord, ScheduleParams, SolverReport
from idealsim.services.blockspace import (
    MetricOperator,
    MixingOperator,
    consensus_gap,
)
from idealsim.services.dualcheck import DualState, dual_gap
from idealsim.services.gossip import ChebyshevOperator
from idealsim.services.objectives import reference_solution, suboptimality

logger = logging.getLogger(__name__)

C_RHO_CONSTANT = 258.0
OUTER_CONSTANT = 2.0


@dataclass(frozen=True)
class Problem:
    """Immutable problem data shared by every run of a sweep"""

    objective: GlobalObjective
    mixing: MixingMatrix
    x_star: np.ndarray
    f_star: float
    x_init: Optional[BlockVector] = None

    def initial_point(self) -> BlockVector:
        if self.x_init is None:
            return BlockVector.zeros(self.objective.n, self.objective.d)
        return self.x_init.require_shape(self.objective.n, self.objective.d)

    def optimum(self) -> BlockVector:
        return BlockVector.consensus(self.objective.n, self.x_star)


def build_problem(
    objective: GlobalObjective,
    mixing: MixingMatrix,
    reference_tol: float = 1e-10,
    x_init: Optional[BlockVector] = None,
) -> Problem:
    if mixing.n != objective.n:
        raise ConfigError(
            f"{mixing.n} agents in the network but {objective.n} local "
            "objectives"
        )
    x_star, f_star = reference_solution(objective, reference_tol)
    return Problem(objective, mixing, x_star, f_star, x_init)


def metric_for(mixing: MixingMatrix, chebyshev: bool) -> MetricOperator:
    return ChebyshevOperator(mixing) if chebyshev else MixingOperator(mixing)


def compute_schedule(
    summary: SpectralSummary,
    F: GlobalObjective,
    rho: float,
    delta_dual: float = 1.0,
    eta: Optional[float] = None,
    beta: Optional[float] = None,
) -> ScheduleParams:
    """Moduli of the smoothed dual and the accelerated outer schedule"""
    if rho < 0:
        raise ValueError(f"rho must be >= 0, got {rho}")
    lam_max, lam_min = summary.lambda_max, summary.lambda_min_plus
    L_rho = lam_max / (F.mu + rho * lam_max)
    mu_rho = lam_min / (F.L + rho * lam_min)
    C_rho = C_RHO_CONSTANT * L_rho * lam_max / (F.mu**2 * mu_rho**2)
    theory_beta = (math.sqrt(L_rho) - math.sqrt(mu_rho)) / (
        math.sqrt(L_rho) + math.sqrt(mu_rho)
    )
    return ScheduleParams(
        rho=rho,
        L=F.L,
        mu=F.mu,
        lambda_max=lam_max,
        lambda_min_plus=lam_min,
        L_rho=L_rho,
        mu_rho=mu_rho,
        kappa_rho=L_rho / mu_rho,
        C_rho=C_rho,
        eta=1.0 / L_rho if eta is None else eta,
        beta=theory_beta if beta is None else beta,
        delta_dual=delta_dual,
    )


def default_rho(
    solver: str, summary: SpectralSummary, F: GlobalObjective
) -> float:
    """L / lambda_max(M) for (accelerated) gradient inner loops,
    L / lambda_min^+(M) for the stochastic one"""
    if solver == "sgd":
        return F.L / summary.lambda_min_plus
    return F.L / summary.lambda_max


def resolve_rho(
    config: AlgorithmConfig, summary: SpectralSummary, F: GlobalObjective
) -> float:
    if config.algorithm in ZERO_RHO_ALGORITHMS:
        return 0.0
    if config.rho is not None:
        return config.rho
    return config.rho_scale * default_rho(config.inner_solver, summary, F)


def dual_stepsize(config: AlgorithmConfig, rho: float) -> Optional[float]:
    """Explicit eta, the rho-compatibility step, or None for 1/L_rho"""
    if config.eta is not None:
        return config.eta
    if config.dual_step == "rho":
        if rho <= 0:
            raise ConfigError(
                "dual_step='rho' needs rho > 0", field="dual_step"
            )
        return rho
    return None


def outer_iterations(params: ScheduleParams, epsilon: float) -> int:
    """ceil(2 sqrt(kappa_rho) ln(C_rho Delta / epsilon)), at least 1"""
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    ratio = params.C_rho * params.delta_dual / epsilon
    if ratio <= 1.0:
        return 1
    count = OUTER_CONSTANT * math.sqrt(params.kappa_rho) * math.log(ratio)
    return max(1, math.ceil(count - 1e-9))


def lower_bound_curve(
    kappa_f: float, kappa_w: float, tau: float, epsilon: float
) -> float:
    """sqrt(kappa_f) (1 + tau sqrt(kappa_W)) ln(1/epsilon), unit constant"""
    if min(kappa_f, kappa_w) <= 0 or tau < 0:
        raise ValueError("condition numbers must be positive, tau >= 0")
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    return (
        math.sqrt(kappa_f)
        * (1.0 + tau * math.sqrt(kappa_w))
        * math.log(1.0 / epsilon)
    )


def inner_budget(
    config: AlgorithmConfig,
    params: ScheduleParams,
    inner_kappa: float,
    k: int,
) -> int:
    """Inner iteration count from the solver complexity table"""
    multiplier = config.stopping.multiplier
    log_term = max(math.log(16.0 * params.C_rho / params.mu_rho), 1.0)
    # gd: kappa log, agd: sqrt(kappa) log, sgd: sigma^2 / (mu^2 eps_k)
    if config.inner_solver == "gd":
        budget = multiplier * inner_kappa * log_term
    elif config.inner_solver == "agd":
        budget = multiplier * math.sqrt(inner_kappa) * log_term
    elif config.inner_solver == "sgd":
        budget = (
            multiplier
            * config.stopping.sigma_sq
            / (params.mu**2 * params.epsilon(k))
        )
    else:
        raise ConfigError(
            f"no iteration budget for solver {config.inner_solver!r}",
            field="inner_solver",
        )
    if budget > config.max_inner:
        logger.warning(
            "Inner budget %.3g capped at max_inner=%d",
            budget,
            config.max_inner,
        )
    return int(min(max(math.ceil(budget), 1), config.max_inner))


def estimate_delta_dual(
    problem: Problem,
    config: AlgorithmConfig,
    metric: MetricOperator,
    rho: float,
) -> Tuple[float, str]:
    """Initial dual gap: user value, exact for quadratics, else f gap"""
    if config.delta_dual is not None:
        return config.delta_dual, "user"
    F = problem.objective
    if F.is_quadratic:
        zero = DualState(BlockVector.zeros(F.n, F.d), rho, metric)
        gap = dual_gap(zero, F, problem.x_star)
        return max(gap, np.finfo(float).tiny), "exact-conjugate"
    start = problem.initial_point().data.mean(axis=0)
    gap = F.centralized_value(start) - problem.f_star
    return max(gap, np.finfo(float).tiny), "initial-gap"


@dataclass(frozen=True)
class OuterSetup:
    metric: MetricOperator
    rho: float
    schedule: ScheduleParams
    outer_steps: int
    delta_kind: str


def prepare(
    config: AlgorithmConfig,
    problem: Problem,
    chebyshev: bool,
    extrapolate: bool,
) -> OuterSetup:
    """Metric, rho, schedules and outer count of one run"""
    F = problem.objective
    metric = metric_for(problem.mixing, chebyshev)
    rho = resolve_rho(config, metric.summary, F)
    delta, kind = estimate_delta_dual(problem, config, metric, rho)
    # Plain AL never extrapolates the duals
    if not extrapolate:
        beta = 0.0
    else:
        beta = config.beta_outer
    schedule = compute_schedule(
        metric.summary,
        F,
        rho,
        delta_dual=delta,
        eta=dual_stepsize(config, rho),
        beta=beta,
    )
    steps = config.max_outer or outer_iterations(schedule, config.epsilon)
    logger.debug(
        "%s: metric=%s rho=%.4g kappa_rho=%.4g eta=%.4g beta=%.4g K=%d",
        config.name,
        metric.label,
        rho,
        schedule.kappa_rho,
        schedule.eta,
        schedule.beta,
        steps,
    )
    return OuterSetup(metric, rho, schedule, steps, kind)


def outer_record(
    k: int,
    problem: Problem,
    X: BlockVector,
    Lambda: BlockVector,
    Omega: BlockVector,
    report: Optional[SolverReport],
    dual_rounds: int,
    record_iterate: bool = False,
    warm_start_gap: Optional[float] = None,
    epsilon: Optional[float] = None,
) -> OuterRecord:
    residual = max(
        float(np.max(np.abs(Lambda.column_sums()))),
        float(np.max(np.abs(Omega.column_sums()))),
    )
    return OuterRecord(
        k=k,
        inner_iterations=report.iterations if report else 0,
        grad_evals=report.grad_evals if report else 0,
        mixing_rounds=(report.mixing_rounds if report else 0) + dual_rounds,
        suboptimality=suboptimality(problem.objective, X, problem.f_star),
        consensus_gap=consensus_gap(X),
        dual_residual=residual,
        dual_norm=Lambda.norm(),
        warm_start_gap=warm_start_gap,
        epsilon=epsilon,
        iterate=np.array(X.data) if record_iterate else None,
    )
