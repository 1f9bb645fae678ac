import hashlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from idealsim.exceptions import IdealSimError, SimulationError
from idealsim.models.configs import AlgorithmConfig, CostModel
from idealsim.models.records import (
    OuterRecord,
    RunState,
    TimeTrace,
    TraceSample,
)
from idealsim.services.framework import run_algorithm
from idealsim.services.schedules import Problem, lower_bound_curve
from idealsim.services.topology import spectrum

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def derive_seed(master: int, label: str, tau: float) -> int:
    """Master seed plus a stable hash of the (algorithm, tau) pair"""
    digest = hashlib.sha256(f"{label}:{tau!r}".encode()).hexdigest()
    return (master + int(digest[:16], 16)) % 2**63


class _Clock:
    """Turns outer records into strictly time-ordered samples"""

    def __init__(self, cost: CostModel, target: Optional[float]):
        self.cost = cost
        self.target = target
        self.time = 0.0
        self.samples: List[TraceSample] = []

    def __call__(self, record: OuterRecord) -> bool:
        if not math.isfinite(record.suboptimality):
            raise SimulationError(
                f"non-finite suboptimality at outer step {record.k}"
            )
        self.time += self.cost.time(record.grad_evals, record.mixing_rounds)
        sample = TraceSample(
            self.time, max(record.suboptimality, 0.0), record.consensus_gap
        )
        # Zero-cost steps overwrite the sample at the same time
        if self.samples and self.samples[-1].time >= self.time:
            self.samples[-1] = sample
        else:
            self.samples.append(sample)
        return self.target is not None and record.suboptimality <= self.target


def simulate(
    config: AlgorithmConfig,
    problem: Problem,
    cost: CostModel,
    target: Optional[float] = None,
) -> TimeTrace:
    """Run one algorithm and charge 1 per gradient round, tau per mixing
    round. Stops at ``target`` suboptimality or after the outer budget."""
    clock = _Clock(cost, target)
    state: RunState = run_algorithm(config, problem, clock)
    start = state.history[0]
    # Every trace starts at time 0 with the initial point
    if not clock.samples or clock.samples[0].time > 0:
        clock.samples.insert(
            0,
            TraceSample(
                0.0, max(start.suboptimality, 0.0), start.consensus_gap
            ),
        )
    metadata = trace_metadata(config, problem, cost, state, target)
    return TimeTrace(samples=clock.samples, metadata=metadata, run=state)


def trace_metadata(
    config: AlgorithmConfig,
    problem: Problem,
    cost: CostModel,
    state: RunState,
    target: Optional[float],
) -> Dict[str, str]:
    config_json = config.model_dump_json()
    metadata = {
        "algorithm": config.algorithm,
        "label": config.name,
        "tau": repr(cost.tau),
        "seed": str(config.seed),
        "config": config_json,
        "config_hash": hashlib.sha256(config_json.encode()).hexdigest(),
        "metric": state.metric,
        "rounds_per_metric": str(state.rounds_per_metric),
        "outer_iterations": str(state.k),
        "target": repr(target),
        "suboptimality": "f(consensus mean) - f(x*)",
        "outer_charge": "1 warm-start round + 1 dual-update metric",
        "f_star": repr(problem.f_star),
    }
    if state.schedule is not None:
        metadata["delta_dual"] = repr(state.schedule.delta_dual)
        metadata["delta_dual_kind"] = state.delta_dual_kind
        metadata["schedule"] = state.schedule.model_dump_json()
    return metadata


@dataclass
class SweepResult:
    label: str
    algorithm: str
    tau: float
    trace: Optional[TimeTrace] = None
    error: Optional[str] = None


def regime_sweep(
    problem: Problem,
    algorithms: Sequence[AlgorithmConfig],
    taus: Sequence[float],
    target: Optional[float] = None,
    master_seed: Optional[int] = None,
    jobs: int = 1,
    isolate_failures: bool = False,
) -> List[SweepResult]:
    """Simulate every (algorithm, tau) pair; results come back in
    algorithm-then-tau order whatever the scheduling."""
    if not algorithms or not taus:
        raise ValueError("a sweep needs at least one algorithm and one tau")
    pairs: List[Tuple[AlgorithmConfig, float]] = []
    for base in algorithms:
        for tau in taus:
            config = base
            # Seed from (master, label, tau), not from scheduling order
            if master_seed is not None:
                seed = derive_seed(master_seed, base.name, tau)
                config = base.model_copy(update={"seed": seed})
            pairs.append((config, tau))

    def run_pair(pair) -> SweepResult:
        config, tau = pair
        result = SweepResult(config.name, config.algorithm, tau)
        try:
            result.trace = simulate(
                config, problem, CostModel(tau=tau), target
            )
        except IdealSimError as e:
            if not isolate_failures:
                raise
            logger.error("%s at tau=%g failed: %s", config.name, tau, e)
            result.error = str(e)
        else:
            logger.info(
                "%s at tau=%g: %d samples, time to target %s",
                config.name,
                tau,
                len(result.trace.samples),
                result.trace.time_to_target(target) if target else "n/a",
            )
        return result

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as executor:
        return list(executor.map(run_pair, pairs))


def write_trace_csv(trace: TimeTrace, path) -> Path:
    """'# key=value' header lines, then time,suboptimality,consensus_gap"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        for key in sorted(trace.metadata):
            handle.write(f"# {key}={trace.metadata[key]}\n")
        trace.to_frame().to_csv(
            handle, index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
        )
    return path


def read_trace_csv(path) -> Tuple[Dict[str, str], pd.DataFrame]:
    """Metadata header and samples of a trace file"""
    metadata = {}
    with open(path) as handle:
        for line in handle:
            if not line.startswith("# "):
                break
            key, _, value = line[2:].rstrip("\n").partition("=")
            metadata[key] = value
    frame = pd.read_csv(path, comment="#", float_precision="round_trip")
    return metadata, frame


def summary_frame(
    results: Sequence[SweepResult], problem: Problem, target: float
) -> pd.DataFrame:
    """Time-to-target table of a sweep, with the lower-bound reference"""
    kappa_w = spectrum(problem.mixing).kappa
    kappa_f = problem.objective.kappa_f
    rows = []
    for result in results:
        trace = result.trace
        if 0 < target < 1:
            bound = lower_bound_curve(kappa_f, kappa_w, result.tau, target)
        else:
            bound = np.nan
        rows.append(
            {
                "label": result.label,
                "algorithm": result.algorithm,
                "tau": result.tau,
                "time_to_target": (
                    trace.time_to_target(target) if trace else np.nan
                ),
                "final_suboptimality": (
                    trace.final_suboptimality if trace else np.nan
                ),
                "final_time": trace.samples[-1].time if trace else np.nan,
                "outer_iterations": trace.run.k if trace else 0,
                "lower_bound": bound,
                "error": result.error or "",
            }
        )
    return pd.DataFrame(rows)


def write_summary_csv(frame: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(
        path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
    )
    return path
