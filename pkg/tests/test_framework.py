import numpy as np
import pytest

from idealsim.exceptions import ConfigError
from idealsim.models.configs import AlgorithmConfig, CostModel
from idealsim.services.dualcheck import DualState, dual_gap
from idealsim.services.framework import (
    run_acc_al,
    run_al,
    run_algorithm,
    run_dgd,
    run_extra,
    run_ideal,
    run_mideal,
)
from idealsim.services.schedules import metric_for, outer_iterations
from idealsim.services.simulator import simulate

from problems import quadratic_problem


def assert_dual_subspace(state):
    for record in state.history:
        assert record.dual_residual <= 1e-8 * (1.0 + record.dual_norm)


def distance_sq(record, problem):
    return float(np.sum((record.iterate - problem.x_star) ** 2))


@pytest.fixture(scope="module")
def metropolis_problem():
    return quadratic_problem(n=4, d=3, kappa=10.0, seed=1, mixing="metropolis")


def test_single_gd_step_ideal_is_extra(metropolis_problem):
    problem = metropolis_problem
    alpha = 1.0 / (4.0 * problem.objective.L)
    ideal = AlgorithmConfig(
        algorithm="ideal",
        inner_solver="gd",
        stopping={"t_inner": 1},
        inner_step=alpha,
        rho=1.0 / (2.0 * alpha),
        eta=1.0 / (2.0 * alpha),
        beta_outer=0.0,
        max_outer=50,
        record_iterates=True,
    )
    extra = AlgorithmConfig(
        algorithm="extra",
        inner_step=alpha,
        max_outer=50,
        record_iterates=True,
    )
    ideal_state = run_ideal(ideal, problem)
    extra_state = run_extra(extra, problem)
    ideal_iterates = ideal_state.iterates()
    extra_iterates = extra_state.iterates()
    assert len(ideal_iterates) == len(extra_iterates) == 51
    for a, b in zip(ideal_iterates, extra_iterates):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-10)
    assert_dual_subspace(ideal_state)
    assert_dual_subspace(extra_state)


def test_extra_default_step_needs_averaging_spectrum(quadratic):
    config = AlgorithmConfig(algorithm="extra", max_outer=5)
    with pytest.raises(ConfigError):
        run_extra(config, quadratic)


def test_extra_converges_with_default_step(metropolis_problem):
    config = AlgorithmConfig(algorithm="extra", max_outer=1500)
    state = run_extra(config, metropolis_problem)
    assert state.history[-1].suboptimality < 1e-8
    assert state.history[-1].consensus_gap < 1e-6


@pytest.mark.parametrize(
    "solver, extra",
    [("agd", {}), ("gd", {}), ("sgd", {"seed": 5})],
)
def test_zero_rho_ideal_is_ssda(solver, extra, small_logistic):
    base = dict(
        inner_solver=solver,
        stopping={"t_inner": 20},
        max_outer=8,
        **extra,
    )
    ideal = AlgorithmConfig(algorithm="ideal", rho=0.0, **base)
    ssda = AlgorithmConfig(algorithm="ssda", **base)
    cost = CostModel(tau=1.0)
    a = simulate(ideal, small_logistic, cost)
    b = simulate(ssda, small_logistic, cost)
    assert a.samples == b.samples
    np.testing.assert_array_equal(a.run.X.data, b.run.X.data)


def test_zero_rho_mideal_is_msda():
    problem = quadratic_problem(n=8, d=2, kappa=5.0, seed=4)
    base = dict(stopping={"t_inner": 15}, max_outer=20)
    mideal = AlgorithmConfig(algorithm="mideal", rho=0.0, **base)
    msda = AlgorithmConfig(algorithm="msda", **base)
    cost = CostModel(tau=0.5)
    a = simulate(mideal, problem, cost)
    b = simulate(msda, problem, cost)
    assert a.samples == b.samples
    assert a.run.metric == b.run.metric == "Q(W)"


@pytest.mark.parametrize("rho", [{"rho": 0.0}, {"rho_scale": 0.1}])
def test_exact_accelerated_al_stays_inside_envelope(rho, quadratic):
    config = AlgorithmConfig(
        algorithm="acc-al",
        inner_solver="exact",
        exact_tol=1e-12,
        max_outer=200,
        record_iterates=True,
        **rho,
    )
    state = run_acc_al(config, quadratic)
    assert state.delta_dual_kind == "exact-conjugate"
    schedule = state.schedule
    for record in state.history[1:]:
        bound = schedule.envelope(record.k)
        assert distance_sq(record, quadratic) <= bound, record.k
    assert_dual_subspace(state)


def test_warm_start_gap_is_bounded(quadratic):
    config = AlgorithmConfig(
        algorithm="ideal",
        inner_solver="agd",
        stopping={"option": "I"},
        rho_scale=0.1,
        exact_tol=1e-12,
        max_outer=100,
    )
    state = run_ideal(config, quadratic)
    schedule = state.schedule
    for record in state.history[1:]:
        previous = schedule.epsilon(record.k - 1)
        bound = 8.0 * schedule.C_rho * previous / schedule.mu_rho
        assert record.warm_start_gap <= bound, record.k
        assert record.epsilon == pytest.approx(schedule.epsilon(record.k))
    assert_dual_subspace(state)


def test_dgd_plateaus_away_from_consensus():
    problem = quadratic_problem(n=6, d=3, kappa=5.0, seed=2)
    ideal = AlgorithmConfig(
        algorithm="ideal", stopping={"t_inner": 50}, max_outer=30
    )
    ideal_state = run_ideal(ideal, problem)
    budget = sum(record.grad_evals for record in ideal_state.history)
    dgd_state = run_dgd(
        AlgorithmConfig(algorithm="dgd", max_outer=budget), problem
    )
    plateau = dgd_state.history[-1].consensus_gap
    halfway = dgd_state.history[budget // 2].consensus_gap
    assert plateau == pytest.approx(halfway, rel=1e-3)
    assert plateau > 10.0 * ideal_state.history[-1].consensus_gap


def test_plain_al_converges_with_exact_solves(quadratic):
    config = AlgorithmConfig(
        algorithm="al", inner_solver="exact", exact_tol=1e-12, max_outer=300
    )
    state = run_al(config, quadratic)
    assert state.schedule.beta == 0.0
    assert state.history[-1].suboptimality < 1e-9
    assert_dual_subspace(state)


def test_ideal_with_complexity_budget(small_logistic):
    config = AlgorithmConfig(
        algorithm="ideal", stopping={"t_inner": None}, max_outer=3
    )
    state = run_ideal(config, small_logistic)
    assert len(state.history) == 4
    budgets = {record.inner_iterations for record in state.history[1:]}
    assert len(budgets) == 1 and budgets.pop() > 1


def test_ideal_sgd_inner_loop_runs(small_logistic):
    config = AlgorithmConfig(
        algorithm="ideal",
        inner_solver="sgd",
        stopping={"t_inner": 50},
        max_outer=5,
    )
    state = run_algorithm(config, small_logistic)
    last = state.history[-1]
    assert len(state.history) == 6
    assert np.isfinite(last.suboptimality)
    assert np.isfinite(last.consensus_gap)
    assert last.grad_evals == 50


def test_callback_stops_early(quadratic):
    config = AlgorithmConfig(algorithm="ideal", max_outer=50)
    state = run_ideal(config, quadratic, callback=lambda r: r.k == 3)
    assert state.stopped_early
    assert [r.k for r in state.history] == [0, 1, 2, 3]


@pytest.mark.parametrize(
    "runner, config",
    [
        (run_al, {"algorithm": "al", "beta_outer": 0.5}),
        (run_acc_al, {"algorithm": "acc-al", "inner_solver": "agd"}),
        (run_mideal, {"algorithm": "mideal", "execution": "per-agent"}),
        (run_dgd, {"algorithm": "dgd"}),
    ],
)
def test_rejected_configurations(runner, config, quadratic):
    with pytest.raises(ConfigError):
        runner(AlgorithmConfig(**config), quadratic)


def test_zero_dual_step_freezes_al(quadratic):
    config = AlgorithmConfig(
        algorithm="al",
        inner_solver="exact",
        exact_tol=1e-12,
        eta=0.0,
        max_outer=6,
        record_iterates=True,
    )
    state = run_al(config, quadratic)
    assert state.schedule.eta == 0.0
    assert all(record.dual_norm == 0.0 for record in state.history)
    iterates = state.iterates()
    for later in iterates[2:]:
        np.testing.assert_allclose(later, iterates[1], rtol=0, atol=1e-10)


def test_mideal_matches_ideal_on_complete_graph():
    problem = quadratic_problem(n=5, kind="complete")
    options = {
        "stopping": {"t_inner": 20},
        "max_outer": 15,
        "record_iterates": True,
    }
    ideal = run_ideal(AlgorithmConfig(algorithm="ideal", **options), problem)
    mideal = run_mideal(
        AlgorithmConfig(algorithm="mideal", **options), problem
    )
    assert mideal.metric == ideal.metric == "W"
    assert mideal.rounds_per_metric == ideal.rounds_per_metric == 1
    assert mideal.schedule.rho == ideal.schedule.rho
    for a, b in zip(mideal.iterates(), ideal.iterates()):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-14)
    assert [r.mixing_rounds for r in mideal.history] == [
        r.mixing_rounds for r in ideal.history
    ]


def test_accelerated_al_without_momentum_is_al(quadratic):
    options = {
        "inner_solver": "exact",
        "exact_tol": 1e-12,
        "beta_outer": 0.0,
        "max_outer": 20,
        "record_iterates": True,
    }
    al = run_al(AlgorithmConfig(algorithm="al", **options), quadratic)
    acc = run_acc_al(
        AlgorithmConfig(algorithm="acc-al", **options), quadratic
    )
    assert acc.schedule.beta == al.schedule.beta == 0.0
    for a, b in zip(acc.iterates(), al.iterates()):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)
    np.testing.assert_allclose(
        acc.Lambda.data, al.Lambda.data, rtol=0, atol=1e-12
    )


def test_accelerated_al_dual_gap_decreases(quadratic):
    F = quadratic.objective
    metric = metric_for(quadratic.mixing, chebyshev=False)
    gaps = {}
    for steps in (10, 30, 60):
        config = AlgorithmConfig(
            algorithm="acc-al",
            inner_solver="exact",
            exact_tol=1e-12,
            max_outer=steps,
        )
        state = run_acc_al(config, quadratic)
        dual = DualState(state.Lambda, state.schedule.rho, metric)
        gaps[steps] = dual_gap(dual, F, quadratic.x_star)
        initial = state.schedule.delta_dual
    assert all(gap >= -1e-9 for gap in gaps.values())
    assert gaps[30] < gaps[10] < initial
    assert gaps[60] <= 1e-6 * initial + 1e-9


def test_ideal_with_large_inner_budget_tracks_acc_al(quadratic):
    options = {"max_outer": 15, "record_iterates": True}
    exact = run_acc_al(
        AlgorithmConfig(
            algorithm="acc-al",
            inner_solver="exact",
            exact_tol=1e-12,
            **options,
        ),
        quadratic,
    )
    inexact = run_ideal(
        AlgorithmConfig(
            algorithm="ideal",
            inner_solver="agd",
            stopping={"t_inner": 2000},
            **options,
        ),
        quadratic,
    )
    assert inexact.schedule.rho == exact.schedule.rho
    for a, b in zip(inexact.iterates(), exact.iterates()):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-8)


def test_ideal_reaches_epsilon_within_outer_count(quadratic):
    epsilon = 1e-6
    config = AlgorithmConfig(
        algorithm="ideal",
        inner_solver="agd",
        stopping={"t_inner": None},
        epsilon=epsilon,
        record_iterates=True,
    )
    state = run_ideal(config, quadratic)
    expected = outer_iterations(state.schedule, epsilon)
    assert len(state.history) == expected + 1
    assert distance_sq(state.history[-1], quadratic) <= epsilon
