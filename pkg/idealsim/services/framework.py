"""Outer algorithms of the decentralized augmented-Lagrangian framework.

AL, accelerated AL, IDEAL and MIDEAL share one outer loop and differ in
extrapolation, inner solver and metric. SSDA and MSDA are IDEAL and MIDEAL
with rho pinned to zero. EXTRA and DGD are implemented from their own
recurrences.
"""

import logging
from typing import Callable, Optional

import numpy as np
from scipy.linalg import eigvalsh

from idealsim.exceptions import ConfigError, MixingMatrixError
from idealsim.models.blocks import BlockVector
from idealsim.models.configs import AlgorithmConfig
from idealsim.models.records import OuterRecord, RunState, StoppingRule
from idealsim.services import agents
from idealsim.services.blockspace import MixingOperator
from idealsim.services.schedules import (
    OuterSetup,
    Problem,
    inner_budget,
    outer_record,
    prepare,
)
from idealsim.services.solvers import (
    Subproblem,
    agd_solve,
    exact_solve,
    exact_solve_with_report,
    gd_solve,
    sgd_solve,
)
from idealsim.services.topology import averaging_operator

logger = logging.getLogger(__name__)

Callback = Callable[[OuterRecord], bool]

SPECTRAL_TOL = 1e-9


def _inner_solve(
    config: AlgorithmConfig,
    setup: OuterSetup,
    p: Subproblem,
    x0: BlockVector,
    k: int,
):
    """Solve P_k from x0; returns (X_k, report, warm-start gap, eps_k)"""
    if config.inner_solver == "exact":
        x, report = exact_solve_with_report(
            p, config.exact_tol, x0, config.max_inner
        )
        return x, report, None, None
    warm_gap = epsilon = None
    # Option I stops at eps_k against a reference solve of P_k
    if config.stopping.option == "I":
        reference = exact_solve(p, config.exact_tol, x0, config.max_inner)
        epsilon = setup.schedule.epsilon(k)
        warm_gap = float(np.sum((x0.data - reference.data) ** 2))
        stop = StoppingRule.accuracy(
            epsilon, reference.data, config.max_inner
        )
    else:
        # Option II runs a fixed or complexity-derived budget
        t_inner = config.stopping.t_inner or inner_budget(
            config, setup.schedule, p.kappa, k
        )
        stop = StoppingRule.fixed(t_inner)
    if config.inner_solver == "gd":
        x, report = gd_solve(p, x0, stop, step=config.inner_step)
    elif config.inner_solver == "agd":
        x, report = agd_solve(p, x0, stop, beta=config.beta_inner)
    else:
        x, report = sgd_solve(p, x0, stop, seed=(config.seed, k))
    return x, report, warm_gap, epsilon


def _run_outer(
    config: AlgorithmConfig,
    problem: Problem,
    chebyshev: bool,
    extrapolate: bool,
    callback: Optional[Callback],
) -> RunState:
    setup = prepare(config, problem, chebyshev, extrapolate)
    F = problem.objective
    metric, schedule = setup.metric, setup.schedule
    eta, beta = schedule.eta, schedule.beta
    # Start from the initial point with zero duals
    X = problem.initial_point()
    Lambda = Omega = BlockVector.zeros(F.n, F.d)
    state = RunState(
        algorithm=config.name,
        X=X,
        Lambda=Lambda,
        Omega=Omega,
        schedule=schedule,
        metric=metric.label,
        rounds_per_metric=metric.rounds,
        delta_dual_kind=setup.delta_kind,
    )
    state.history.append(
        outer_record(
            0, problem, X, Lambda, Omega, None, 0, config.record_iterates
        )
    )
    for k in range(1, setup.outer_steps + 1):
        # Warm-started inner solve of P_k
        p = Subproblem(F, Omega, setup.rho, metric)
        X, report, warm_gap, epsilon = _inner_solve(config, setup, p, X, k)
        # Dual ascent, then Nesterov extrapolation of the duals
        Lambda_next = Omega.data + eta * metric.apply(X.data)
        Omega_next = Lambda_next + beta * (Lambda_next - Lambda.data)
        Lambda, Omega = BlockVector(Lambda_next), BlockVector(Omega_next)
        record = outer_record(
            k,
            problem,
            X,
            Lambda,
            Omega,
            report,
            metric.rounds,
            config.record_iterates,
            warm_gap,
            epsilon,
        )
        state.X, state.Lambda, state.Omega, state.k = X, Lambda, Omega, k
        state.history.append(record)
        logger.debug(
            "%s k=%d subopt=%.3e gap=%.3e",
            config.name,
            k,
            record.suboptimality,
            record.consensus_gap,
        )
        if callback is not None and callback(record):
            state.stopped_early = True
            break
    return state


def run_al(
    config: AlgorithmConfig,
    problem: Problem,
    callback: Optional[Callback] = None,
) -> RunState:
    """Dual ascent on the augmented Lagrangian, no extrapolation"""
    if config.beta_outer:
        raise ConfigError(
            "the plain augmented Lagrangian has no extrapolation",
            field="beta_outer",
        )
    return _run_outer(config, problem, False, False, callback)


def run_acc_al(
    config: AlgorithmConfig,
    problem: Problem,
    callback: Optional[Callback] = None,
) -> RunState:
    """Nesterov-extrapolated duals with exact subproblem solves"""
    if config.inner_solver != "exact":
        raise ConfigError(
            "acc-al solves every subproblem exactly, set inner_solver=exact",
            field="inner_solver",
        )
    return _run_outer(config, problem, False, True, callback)


def run_ideal(
    config: AlgorithmConfig,
    problem: Problem,
    callback: Optional[Callback] = None,
) -> RunState:
    """Inexact accelerated AL warm-started at X_{k-1}, metric W"""
    if config.execution == "per-agent":
        return agents.run_ideal_per_agent(config, problem, callback)
    return _run_outer(config, problem, False, True, callback)


def run_mideal(
    config: AlgorithmConfig,
    problem: Problem,
    callback: Optional[Callback] = None,
) -> RunState:
    """IDEAL with the Chebyshev-accelerated metric Q(W)"""
    if config.execution == "per-agent":
        raise ConfigError(
            "per-agent execution covers the W metric only",
            field="execution",
        )
    return _run_outer(config, problem, True, True, callback)


def _fixed_steps(config: AlgorithmConfig) -> int:
    if config.max_outer is None:
        raise ConfigError(
            f"{config.algorithm} needs an explicit iteration count",
            field="max_outer",
        )
    return config.max_outer


def _plain_record(k, problem, X, Lambda, config) -> OuterRecord:
    return outer_record(
        k,
        problem,
        X,
        Lambda,
        Lambda,
        None,
        1 if k else 0,
        config.record_iterates,
    )


def run_extra(
    config: AlgorithmConfig,
    problem: Problem,
    callback: Optional[Callback] = None,
) -> RunState:
    """Two-step recurrence with rho = eta = 1 / (2 alpha):

    X_{k+1} = (2I - alpha(rho+eta)M) X_k - (I - alpha rho M) X_{k-1}
              - alpha (grad F(X_k) - grad F(X_{k-1}))
    """
    F = problem.objective
    metric = MixingOperator(problem.mixing)
    lam_max = metric.lambda_max
    if config.inner_step is not None:
        alpha = config.inner_step
    elif lam_max < 2.0:
        alpha = (1.0 - lam_max / 2.0) / F.L
    else:
        raise ConfigError(
            f"EXTRA needs lambda_max(W) < 2 for a default step, got "
            f"{lam_max:.3f}; build W from a doubly-stochastic matrix or "
            "set inner_step",
            field="inner_step",
        )
    rho = eta = 1.0 / (2.0 * alpha)
    steps = _fixed_steps(config)

    # First step is a plain gradient step on the penalized objective
    X_prev = problem.initial_point().data
    G_prev = F.grad(X_prev)
    MX_prev = metric.apply(X_prev)
    X = X_prev - alpha * (G_prev + rho * MX_prev)
    Lambda = eta * metric.apply(X)
    state = RunState(
        algorithm=config.name,
        X=BlockVector(X_prev),
        Lambda=BlockVector.zeros(F.n, F.d),
        Omega=BlockVector.zeros(F.n, F.d),
        metric=metric.label,
    )
    state.history.append(
        _plain_record(0, problem, state.X, state.Lambda, config)
    )
    for k in range(1, steps + 1):
        if k > 1:
            # Two-step recurrence, reusing the previous gradient and mix
            G = F.grad(X)
            MX = metric.apply(X)
            X_next = (
                2.0 * X
                - alpha * (rho + eta) * MX
                - X_prev
                + alpha * rho * MX_prev
                - alpha * (G - G_prev)
            )
            X_prev, G_prev, MX_prev = X, G, MX
            X = X_next
            Lambda = Lambda + eta * metric.apply(X)
        state.X, state.Lambda, state.k = BlockVector(X), BlockVector(Lambda), k
        state.Omega = state.Lambda
        record = _plain_record(k, problem, state.X, state.Lambda, config)
        record = _charge_gradient(record)
        state.history.append(record)
        if callback is not None and callback(record):
            state.stopped_early = True
            break
    return state


def _charge_gradient(record: OuterRecord) -> OuterRecord:
    # One local gradient per iteration for the single-loop baselines.
    return OuterRecord(
        k=record.k,
        inner_iterations=1,
        grad_evals=1,
        mixing_rounds=record.mixing_rounds,
        suboptimality=record.suboptimality,
        consensus_gap=record.consensus_gap,
        dual_residual=record.dual_residual,
        dual_norm=record.dual_norm,
        iterate=record.iterate,
    )


def run_dgd(
    config: AlgorithmConfig,
    problem: Problem,
    callback: Optional[Callback] = None,
) -> RunState:
    """X_{k+1} = W_DS X_k - step grad F(X_k) with a constant step"""
    F = problem.objective
    averaging = averaging_operator(problem.mixing)
    # Averaging operator must have spectral radius <= 1
    eigenvalues = eigvalsh(averaging)
    if max(abs(eigenvalues[0]), abs(eigenvalues[-1])) > 1.0 + SPECTRAL_TOL:
        raise MixingMatrixError(
            f"averaging operator has spectral radius "
            f"{max(abs(eigenvalues[0]), abs(eigenvalues[-1])):.6f} > 1"
        )
    step = config.inner_step or 1.0 / F.L
    steps = _fixed_steps(config)
    X = problem.initial_point().data
    zeros = BlockVector.zeros(F.n, F.d)
    state = RunState(
        algorithm=config.name,
        X=BlockVector(X),
        Lambda=zeros,
        Omega=zeros,
        metric="W_DS",
    )
    state.history.append(_plain_record(0, problem, state.X, zeros, config))
    for k in range(1, steps + 1):
        # Average with neighbors, then take a local gradient step
        X = averaging @ X - step * F.grad(X)
        state.X, state.k = BlockVector(X), k
        record = _charge_gradient(
            _plain_record(k, problem, state.X, zeros, config)
        )
        state.history.append(record)
        if not np.isfinite(record.suboptimality):
            logger.warning("DGD diverged at k=%d with step %.3g", k, step)
        if callback is not None and callback(record):
            state.stopped_early = True
            break
    return state


RUNNERS = {
    "dgd": run_dgd,
    "al": run_al,
    "acc-al": run_acc_al,
    "ideal": run_ideal,
    "ssda": run_ideal,
    "mideal": run_mideal,
    "msda": run_mideal,
    "extra": run_extra,
}


def run_algorithm(
    config: AlgorithmConfig,
    problem: Problem,
    callback: Optional[Callback] = None,
) -> RunState:
    return RUNNERS[config.algorithm](config, problem, callback)
