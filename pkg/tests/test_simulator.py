import math

import numpy as np
import pytest

from idealsim.exceptions import ConfigError, SimulationError
from idealsim.models.configs import AlgorithmConfig, CostModel
from idealsim.services.simulator import (
    derive_seed,
    read_trace_csv,
    regime_sweep,
    simulate,
    summary_frame,
    write_summary_csv,
    write_trace_csv,
)

from problems import logistic_problem, quadratic_problem


def ideal(t_inner=10, max_outer=10, **kwargs):
    return AlgorithmConfig(
        algorithm="ideal",
        stopping={"t_inner": t_inner},
        max_outer=max_outer,
        **kwargs,
    )


@pytest.fixture(scope="module")
def cycle10():
    return quadratic_problem(n=10, d=2, kappa=10.0, seed=3)


def test_zero_tau_counts_gradient_rounds(quadratic):
    trace = simulate(ideal(), quadratic, CostModel(tau=0.0))
    gradients = np.cumsum([r.grad_evals for r in trace.run.history])
    assert [s.time for s in trace.samples] == list(gradients)


def test_cost_model_charges_tau_per_round():
    cost = CostModel(tau=2.0)
    assert cost.time(3, 4) == 11.0
    assert set(CostModel.model_fields) == {"tau"}


@pytest.mark.parametrize("tau", [0.0, 0.5, 100.0])
def test_ideal_outer_step_cost(tau, quadratic):
    config = ideal(t_inner=100, max_outer=7)
    trace = simulate(config, quadratic, CostModel(tau=tau))
    expected = 7 * (100 * (1 + tau) + 2 * tau)
    assert trace.samples[-1].time == pytest.approx(expected)


def test_mideal_outer_step_cost(cycle10):
    config = AlgorithmConfig(
        algorithm="mideal", stopping={"t_inner": 10}, max_outer=4
    )
    tau = 0.25
    trace = simulate(config, cycle10, CostModel(tau=tau))
    j = trace.run.rounds_per_metric
    assert j == 3
    per_outer = 10 * (1 + j * tau) + tau + j * tau
    assert trace.samples[-1].time == pytest.approx(4 * per_outer)
    assert trace.metadata["rounds_per_metric"] == "3"


def test_dgd_step_cost(quadratic):
    config = AlgorithmConfig(algorithm="dgd", max_outer=12)
    trace = simulate(config, quadratic, CostModel(tau=3.0))
    times = [s.time for s in trace.samples]
    assert times == [4.0 * k for k in range(13)]


@pytest.mark.parametrize(
    "algorithm", ["ideal", "mideal", "ssda", "msda", "al", "dgd"]
)
def test_times_start_at_zero_and_increase(algorithm, cycle10):
    document = {"algorithm": algorithm, "max_outer": 15}
    if algorithm == "al":
        document["inner_solver"] = "exact"
    trace = simulate(
        AlgorithmConfig(**document), cycle10, CostModel(tau=1.5)
    )
    times = [s.time for s in trace.samples]
    assert times[0] == 0.0
    assert all(b > a for a, b in zip(times, times[1:]))


def test_target_stops_run(quadratic):
    target = 1e-6
    config = ideal(t_inner=30, max_outer=500)
    trace = simulate(config, quadratic, CostModel(tau=1.0), target)
    assert trace.run.stopped_early
    assert trace.samples[-1].suboptimality <= target
    assert all(s.suboptimality > target for s in trace.samples[:-1])
    assert trace.time_to_target(target) == trace.samples[-1].time
    assert math.isinf(trace.time_to_target(0.0))


def test_diverging_run_is_reported(quadratic):
    config = AlgorithmConfig(algorithm="dgd", inner_step=100.0, max_outer=500)
    with pytest.raises(SimulationError):
        simulate(config, quadratic, CostModel(tau=1.0))


def test_metadata_describes_run(quadratic):
    trace = simulate(ideal(), quadratic, CostModel(tau=0.5), target=1e-3)
    metadata = trace.metadata
    assert metadata["algorithm"] == "ideal"
    assert metadata["tau"] == "0.5"
    assert metadata["metric"] == "W"
    assert metadata["delta_dual_kind"] == "exact-conjugate"
    assert len(metadata["config_hash"]) == 64
    assert "schedule" in metadata


def test_derive_seed_is_stable():
    assert derive_seed(7, "ideal", 1.0) == derive_seed(7, "ideal", 1.0)
    assert derive_seed(7, "ideal", 1.0) != derive_seed(7, "ideal", 10.0)
    assert derive_seed(7, "ideal", 1.0) != derive_seed(8, "ideal", 1.0)
    assert 0 <= derive_seed(2**63 - 1, "msda", 0.0) < 2**63


def test_single_pair_sweep_matches_simulate(quadratic):
    config = ideal()
    [result] = regime_sweep(quadratic, [config], [2.0])
    direct = simulate(config, quadratic, CostModel(tau=2.0))
    assert result.error is None
    assert result.trace.samples == direct.samples


def test_sweep_order_and_seeds(quadratic):
    configs = [
        ideal(label="a"),
        AlgorithmConfig(algorithm="dgd", label="b", max_outer=5),
    ]
    taus = [0.1, 1.0, 10.0]
    results = regime_sweep(quadratic, configs, taus, master_seed=3, jobs=3)
    assert [(r.label, r.tau) for r in results] == [
        (label, tau) for label in ("a", "b") for tau in taus
    ]
    seeds = [r.trace.metadata["seed"] for r in results]
    assert seeds[0] == str(derive_seed(3, "a", 0.1))
    assert len(set(seeds)) == len(seeds)


def test_sweep_isolates_failures(quadratic):
    configs = [
        ideal(label="ok"),
        AlgorithmConfig(algorithm="extra", label="bad", max_outer=5),
    ]
    results = regime_sweep(quadratic, configs, [1.0], isolate_failures=True)
    assert results[0].error is None
    assert results[1].trace is None
    assert "lambda_max" in results[1].error
    with pytest.raises(ConfigError):
        regime_sweep(quadratic, configs, [1.0])


def test_trace_csv_keeps_header_and_samples(quadratic, tmp_path):
    trace = simulate(ideal(), quadratic, CostModel(tau=0.3))
    path = write_trace_csv(trace, tmp_path / "traces" / "ideal.csv")
    metadata, frame = read_trace_csv(path)
    assert metadata == trace.metadata
    assert list(frame.columns) == ["time", "suboptimality", "consensus_gap"]
    np.testing.assert_array_equal(
        frame.to_numpy(), np.array(trace.samples, dtype=float)
    )
    assert path.read_text().splitlines()[0].startswith("# algorithm=")


def test_summary_table(quadratic, tmp_path):
    config = ideal(t_inner=30, max_outer=200)
    results = regime_sweep(quadratic, [config], [1.0], 1e-6)
    frame = summary_frame(results, quadratic, 1e-6)
    row = frame.iloc[0]
    assert row["label"] == "ideal"
    assert row["time_to_target"] == results[0].trace.samples[-1].time
    assert row["lower_bound"] > 0
    assert row["error"] == ""
    assert np.isnan(summary_frame(results, quadratic, 2.0)["lower_bound"][0])
    path = write_summary_csv(frame, tmp_path / "summary.csv")
    assert path.read_text().startswith("label,algorithm,tau,time_to_target")


@pytest.mark.slow
def test_regime_ordering_on_logistic_regression():
    problem = logistic_problem()
    target = 1e-5
    configs = [
        AlgorithmConfig(
            algorithm=name, stopping={"t_inner": 100}, max_outer=600
        )
        for name in ("ideal", "mideal", "msda")
    ]
    results = regime_sweep(problem, configs, [0.01, 100.0], target, jobs=3)
    times = {
        (r.algorithm, r.tau): r.trace.time_to_target(target) for r in results
    }
    assert math.isfinite(times[("mideal", 0.01)])
    assert math.isfinite(times[("ideal", 100.0)])
    assert times[("mideal", 0.01)] < times[("ideal", 0.01)]
    assert times[("mideal", 0.01)] < times[("msda", 0.01)]
    assert times[("ideal", 100.0)] <= 1.1 * times[("mideal", 100.0)]
