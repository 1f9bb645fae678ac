import argparse
import json
import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from idealsim.commands import EXIT_CONFIG, EXIT_OK, EXIT_RUN
from idealsim.exceptions import IdealSimError
from idealsim.models.configs import AlgorithmConfig, ExperimentConfig
from idealsim.services.experiment import (
    algorithm_configs,
    build_experiment,
    load_experiment,
)
from idealsim.services.schedules import Problem
from idealsim.services.simulator import (
    SweepResult,
    regime_sweep,
    summary_frame,
    write_summary_csv,
    write_trace_csv,
)

logger = logging.getLogger(__name__)


def trace_name(label: str, tau: float) -> str:
    slug = re.sub(r"[^A-Za-z0-9._-]+", "-", label)
    return f"{slug}_tau{tau!r}.csv"


def _schedule_dump(results: List[SweepResult]) -> Dict[str, dict]:
    dump: Dict[str, dict] = {}
    for result in results:
        if result.trace is None:
            continue
        state = result.trace.run
        dump.setdefault(result.label, {})[repr(result.tau)] = {
            "algorithm": result.algorithm,
            "metric": state.metric,
            "rounds_per_metric": state.rounds_per_metric,
            "delta_dual_kind": state.delta_dual_kind,
            "schedule": (
                state.schedule.model_dump() if state.schedule else None
            ),
        }
    return dump


def write_artifacts(
    results: List[SweepResult],
    problem: Problem,
    target: float,
    out_dir: Path,
) -> Path:
    """traces/*.csv, summary.csv and schedules.json under out_dir"""
    out_dir.mkdir(parents=True, exist_ok=True)
    for result in results:
        if result.trace is not None:
            write_trace_csv(
                result.trace,
                out_dir / "traces" / trace_name(result.label, result.tau),
            )
    summary = summary_frame(results, problem, target)
    write_summary_csv(summary, out_dir / "summary.csv")
    with open(out_dir / "schedules.json", "w") as handle:
        json.dump(_schedule_dump(results), handle, indent=2, sort_keys=True)
        handle.write("\n")
    logger.info("Wrote %d traces to %s", len(results), out_dir)
    return out_dir


def prepare_experiment(
    config_path, seed: Optional[int]
) -> Tuple[ExperimentConfig, Problem]:
    config = load_experiment(config_path)
    if seed is not None:
        config = config.model_copy(update={"seed": seed})
    return config, build_experiment(config)


def sweep_and_write(
    config: ExperimentConfig,
    problem: Problem,
    algorithms: List[AlgorithmConfig],
    out_dir: Path,
    jobs: int,
) -> int:
    results = regime_sweep(
        problem,
        algorithms,
        config.taus,
        target=config.target,
        master_seed=config.seed,
        jobs=jobs,
        isolate_failures=True,
    )
    write_artifacts(results, problem, config.target, out_dir)
    failed = [r for r in results if r.error is not None]
    if failed:
        logger.error(
            "%d of %d runs failed, see %s",
            len(failed),
            len(results),
            out_dir / "summary.csv",
        )
        return EXIT_RUN
    return EXIT_OK


def cmd_run(
    config_path,
    out: Optional[str] = None,
    seed: Optional[int] = None,
    jobs: int = 1,
) -> int:
    """Run every configured algorithm at every tau and write the artifacts"""
    try:
        config, problem = prepare_experiment(config_path, seed)
    except IdealSimError as e:
        logger.error("Cannot set up %s: %s", config_path, e)
        return EXIT_CONFIG
    out_dir = Path(out or config.output_dir)
    return sweep_and_write(
        config, problem, algorithm_configs(config), out_dir, jobs
    )


def handle(args: argparse.Namespace) -> int:
    return cmd_run(args.config, out=args.out, seed=args.seed, jobs=args.jobs)


def register(subparsers, common) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(
        "run",
        parents=[common],
        help="run the algorithm and tau sweep of an experiment file",
    )
    parser.add_argument("config", help="experiment JSON file")
    parser.set_defaults(handler=handle)
    return parser
