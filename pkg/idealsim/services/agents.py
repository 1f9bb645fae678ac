"""Message-passing execution of IDEAL.

Every agent keeps its own primal, dual and momentum state and only reads
neighbor vectors through synchronous exchange rounds. The iterates match
the matrix-form outer loop up to floating-point summation order.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from idealsim.exceptions import ConfigError
from idealsim.models.blocks import BlockVector
from idealsim.models.configs import AlgorithmConfig
from idealsim.models.objectives import LocalObjective
from idealsim.models.records import OuterRecord, RunState, SolverReport
from idealsim.services.schedules import (
    Problem,
    inner_budget,
    outer_record,
    prepare,
)

logger = logging.getLogger(__name__)


@dataclass
class Agent:
    index: int
    objective: LocalObjective
    neighborhood: List[int]
    weights: np.ndarray
    x: np.ndarray
    lam: np.ndarray
    omega: np.ndarray

    def average(self, messages: np.ndarray) -> np.ndarray:
        """sum_j W_ij m_j over the closed neighborhood"""
        return self.weights @ messages[self.neighborhood]


class AgentNetwork:
    def __init__(self, problem: Problem):
        entries = problem.mixing.entries
        start = problem.initial_point().data
        d = problem.objective.d
        self.agents: List[Agent] = []
        for i, objective in enumerate(problem.objective.locals):
            neighborhood = np.flatnonzero(entries[i]).tolist()
            self.agents.append(
                Agent(
                    index=i,
                    objective=objective,
                    neighborhood=neighborhood,
                    weights=np.array(entries[i, neighborhood]),
                    x=np.array(start[i]),
                    lam=np.zeros(d),
                    omega=np.zeros(d),
                )
            )

    def exchange(self, vectors: List[np.ndarray]) -> List[np.ndarray]:
        """One synchronous round: every agent averages its neighbors"""
        messages = np.stack(vectors)
        return [agent.average(messages) for agent in self.agents]

    def stack(self, attribute: str) -> BlockVector:
        return BlockVector(
            np.stack([getattr(agent, attribute) for agent in self.agents])
        )


def _check_supported(config: AlgorithmConfig):
    if config.algorithm not in ("ideal", "ssda"):
        raise ConfigError(
            f"per-agent execution supports ideal and ssda, got "
            f"{config.algorithm}",
            field="execution",
        )
    if config.inner_solver not in ("gd", "agd"):
        raise ConfigError(
            "per-agent execution supports gd and agd inner solvers",
            field="inner_solver",
        )
    if config.stopping.option != "II":
        raise ConfigError(
            "per-agent execution runs fixed inner budgets (Option II)",
            field="stopping.option",
        )


def run_ideal_per_agent(
    config: AlgorithmConfig,
    problem: Problem,
    callback: Optional[Callable[[OuterRecord], bool]] = None,
) -> RunState:
    _check_supported(config)
    setup = prepare(config, problem, chebyshev=False, extrapolate=True)
    schedule, rho = setup.schedule, setup.rho
    eta, beta_outer = schedule.eta, schedule.beta
    F = problem.objective
    smoothness = F.L + rho * setup.metric.lambda_max
    inner_kappa = smoothness / F.mu
    if config.inner_solver == "gd":
        step = config.inner_step or 1.0 / smoothness
        beta_inner = 0.0
    else:
        step = 1.0 / smoothness
        root = math.sqrt(inner_kappa)
        beta_inner = (
            config.beta_inner
            if config.beta_inner is not None
            else (root - 1.0) / (root + 1.0)
        )

    network = AgentNetwork(problem)
    agents = network.agents
    X = network.stack("x")
    zeros = BlockVector.zeros(F.n, F.d)
    state = RunState(
        algorithm=config.name,
        X=X,
        Lambda=zeros,
        Omega=zeros,
        schedule=schedule,
        metric=setup.metric.label,
        rounds_per_metric=1,
        delta_dual_kind=setup.delta_kind,
    )
    state.history.append(
        outer_record(
            0, problem, X, zeros, zeros, None, 0, config.record_iterates
        )
    )
    for k in range(1, setup.outer_steps + 1):
        t_inner = config.stopping.t_inner or inner_budget(
            config, schedule, inner_kappa, k
        )
        # Inner loop: each agent steps on its own block, one exchange per step
        xs = [agent.x for agent in agents]
        ys = list(xs)
        y_bar = network.exchange(ys)
        for t in range(t_inner):
            next_xs, next_ys = [], []
            for agent, x, y, mixed in zip(agents, xs, ys, y_bar):
                gradient = agent.objective.grad(y) + agent.omega + rho * mixed
                next_x = y - step * gradient
                next_xs.append(next_x)
                next_ys.append(next_x + beta_inner * (next_x - x))
            if config.inner_solver == "gd":
                next_ys = next_xs
            xs, ys = next_xs, next_ys
            if t + 1 < t_inner:
                y_bar = network.exchange(ys)
        # One more exchange for the dual update
        x_bar = network.exchange(xs)
        for agent, x, mixed in zip(agents, xs, x_bar):
            lam_next = agent.omega + eta * mixed
            agent.omega = lam_next + beta_outer * (lam_next - agent.lam)
            agent.lam = lam_next
            agent.x = x

        X = network.stack("x")
        Lambda, Omega = network.stack("lam"), network.stack("omega")
        report = SolverReport(
            iterations=t_inner,
            grad_evals=t_inner,
            mixing_rounds=t_inner + 1,
            grad_norm=float("nan"),
        )
        record = outer_record(
            k, problem, X, Lambda, Omega, report, 1, config.record_iterates
        )
        state.X, state.Lambda, state.Omega, state.k = X, Lambda, Omega, k
        state.history.append(record)
        if callback is not None and callback(record):
            state.stopped_early = True
            break
    return state
