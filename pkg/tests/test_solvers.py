import numpy as np
import pytest

from idealsim.exceptions import ConvergenceError, DivergenceError
from idealsim.models.blocks import BlockVector
from idealsim.models.records import StoppingRule
from idealsim.services.blockspace import MixingOperator, project_zero_mean
from idealsim.services.gossip import ChebyshevOperator
from idealsim.services.solvers import (
    Subproblem,
    agd_solve,
    exact_solve,
    exact_solve_with_report,
    gd_solve,
    sgd_solve,
    subproblem_grad,
    subproblem_value,
)

from problems import logistic_problem, quadratic_problem


@pytest.fixture(scope="module")
def subproblem():
    problem = quadratic_problem(n=4, d=3, kappa=10.0, seed=3)
    omega = project_zero_mean(
        BlockVector(np.random.default_rng(0).standard_normal((4, 3)))
    )
    metric = MixingOperator(problem.mixing)
    return Subproblem(problem.objective, omega, 1.0, metric)


def test_subproblem_gradient_matches_value(subproblem):
    x = BlockVector(np.random.default_rng(1).standard_normal((4, 3)))
    direction = np.random.default_rng(2).standard_normal((4, 3))
    h = 1e-6
    plus = subproblem_value(subproblem, BlockVector(x.data + h * direction))
    minus = subproblem_value(subproblem, BlockVector(x.data - h * direction))
    expected = (plus - minus) / (2 * h)
    actual = float(np.sum(subproblem_grad(subproblem, x).data * direction))
    assert actual == pytest.approx(expected, rel=1e-6)


def test_exact_solve_zeroes_the_gradient(subproblem):
    x = exact_solve(subproblem, 1e-12)
    assert subproblem_grad(subproblem, x).norm() <= 1e-10


def test_gd_and_agd_approach_the_exact_solution(subproblem):
    target = exact_solve(subproblem, 1e-12).data
    start = BlockVector.zeros(4, 3)
    for solver in (gd_solve, agd_solve):
        x, report = solver(subproblem, start, StoppingRule.fixed(2000))
        np.testing.assert_allclose(x.data, target, atol=1e-8)
        assert report.iterations == report.grad_evals == 2000
        assert report.mixing_rounds == 2000 + 1


def test_option_one_stops_at_requested_accuracy(subproblem):
    target = exact_solve(subproblem, 1e-12).data
    stop = StoppingRule.accuracy(1e-10, target)
    x, report = agd_solve(subproblem, BlockVector.zeros(4, 3), stop)
    assert np.sum((x.data - target) ** 2) <= 1e-10
    assert 0 < report.iterations < 1000


def test_option_one_raises_at_the_cap(subproblem):
    target = exact_solve(subproblem, 1e-12).data
    stop = StoppingRule.accuracy(1e-20, target, max_iterations=3)
    with pytest.raises(ConvergenceError):
        gd_solve(subproblem, BlockVector.zeros(4, 3), stop)


def test_oversized_step_diverges(subproblem):
    with pytest.raises(DivergenceError):
        gd_solve(
            subproblem,
            BlockVector(np.ones((4, 3))),
            StoppingRule.fixed(5000),
            step=10.0,
        )


def test_agd_tracks_decreasing_gradient_norm(subproblem):
    x0 = BlockVector.zeros(4, 3)
    _, report = agd_solve(
        subproblem, x0, StoppingRule.fixed(400), track=True
    )
    history = report.grad_norm_history
    assert len(history) == 400
    # decreases window to window until the floating-point floor
    window = 10
    for start in range(0, 300, window):
        if history[start] < 1e-9:
            break
        later = history[start + window : start + 2 * window]
        assert min(later) < history[start]


def test_chebyshev_metric_charges_j_rounds():
    problem = quadratic_problem(n=10, d=2, kappa=5.0)
    metric = ChebyshevOperator(problem.mixing)
    p = Subproblem(problem.objective, BlockVector.zeros(10, 2), 0.5, metric)
    _, report = gd_solve(p, BlockVector.zeros(10, 2), StoppingRule.fixed(7))
    assert report.mixing_rounds == 7 * metric.rounds + 1


def test_sgd_is_reproducible_and_converges():
    problem = logistic_problem(n=4, m=40, d=3, mu=0.1)
    p = Subproblem(
        problem.objective,
        BlockVector.zeros(4, 3),
        0.5,
        MixingOperator(problem.mixing),
    )
    start = BlockVector.zeros(4, 3)
    stop = StoppingRule.fixed(20000)
    a, _ = sgd_solve(p, start, stop, seed=(0, 1))
    b, _ = sgd_solve(p, start, stop, seed=(0, 1))
    c, _ = sgd_solve(p, start, stop, seed=(0, 2))
    np.testing.assert_array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)
    optimum = subproblem_value(p, exact_solve(p, 1e-10))
    initial_gap = subproblem_value(p, start) - optimum
    assert subproblem_value(p, a) - optimum < 0.25 * initial_gap


def test_exact_solve_on_logistic_reports_work():
    problem = logistic_problem(n=4, m=40, d=3, mu=0.1)
    p = Subproblem(
        problem.objective,
        BlockVector.zeros(4, 3),
        1.0,
        MixingOperator(problem.mixing),
    )
    x, report = exact_solve_with_report(p, 1e-9)
    assert report.grad_norm <= 1e-9
    assert report.iterations > 0
