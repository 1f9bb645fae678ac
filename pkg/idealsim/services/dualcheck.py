"""Dual-side oracles in the scaled variables of the accelerated framework.

The dual iterates Lambda live in the zero-column-sum subspace (the image of
M). The Moreau-envelope gradients are obtained through the subproblem
minimizer, so no square root of M is ever formed.
"""

from dataclasses import dataclass

import numpy as np

from idealsim.exceptions import DualStateError, ObjectiveError
from idealsim.models.blocks import BlockVector
from idealsim.models.objectives import GlobalObjective
from idealsim.services.blockspace import MetricOperator
from idealsim.services.solvers import Subproblem, exact_solve

SUBSPACE_TOL = 1e-8


@dataclass(frozen=True)
class DualState:
    lam: BlockVector
    rho: float
    metric: MetricOperator

    def __post_init__(self):
        residual = float(np.max(np.abs(self.lam.column_sums())))
        if residual > SUBSPACE_TOL * (1.0 + self.lam.norm()):
            raise DualStateError(
                f"dual variable has column sums up to {residual:.3e}; "
                "project it onto the zero-mean subspace first"
            )


def prox_psi(
    omega: BlockVector,
    rho: float,
    F: GlobalObjective,
    metric: MetricOperator,
    tol: float = 1e-10,
) -> BlockVector:
    """argmin_X F(X) + <Omega, X> + (rho/2)||X||_M^2"""
    return exact_solve(Subproblem(F, omega, rho, metric), tol)


def phi_value(
    state: DualState, F: GlobalObjective, tol: float = 1e-10
) -> float:
    """-min_X {F(X) + <Lambda, X> + (rho/2)||X||_M^2}"""
    X = prox_psi(state.lam, state.rho, F, state.metric, tol).data
    regularizer = float(np.sum(X * state.metric.apply(X)))
    value = (
        F.value(X)
        + float(np.sum(state.lam.data * X))
        + 0.5 * state.rho * regularizer
    )
    return -value


def moreau_phi_grad(
    state: DualState, F: GlobalObjective, tol: float = 1e-10
) -> BlockVector:
    """-M prox_psi(Lambda); vanishes exactly at the dual optimum"""
    X = prox_psi(state.lam, state.rho, F, state.metric, tol)
    return BlockVector(-state.metric.apply(X.data))


def dual_optimum(F: GlobalObjective, x_star: np.ndarray) -> BlockVector:
    """Lambda* = -grad F(1 x*), the scaled dual solution"""
    return BlockVector(-F.grad(np.tile(x_star, (F.n, 1))))


def dual_gap(
    state: DualState,
    F: GlobalObjective,
    x_star: np.ndarray,
    tol: float = 1e-10,
) -> float:
    """F*(-Lambda) - F*(-Lambda*) for quadratics, a primal surrogate else.

    The surrogate is f(mean(prox_psi(Lambda))) - f(x*).
    """
    if x_star is None:
        raise ObjectiveError("dual gap needs the reference solution x*")
    if F.is_quadratic:
        optimum = dual_optimum(F, x_star).data
        current = sum(
            f.conjugate(-row) for f, row in zip(F.locals, state.lam.data)
        )
        best = sum(f.conjugate(-row) for f, row in zip(F.locals, optimum))
        return float(current - best)
    X = prox_psi(state.lam, state.rho, F, state.metric, tol)
    mean = X.data.mean(axis=0)
    return F.centralized_value(mean) - F.centralized_value(x_star)
