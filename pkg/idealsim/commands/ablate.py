import argparse
import logging
from pathlib import Path
from typing import List, Optional, Sequence

from idealsim.commands import EXIT_CONFIG
from idealsim.commands.run import prepare_experiment, sweep_and_write
from idealsim.exceptions import ConfigError, IdealSimError
from idealsim.models.configs import AlgorithmConfig, ExperimentConfig

logger = logging.getLogger(__name__)

AXES = ("rho", "t_inner")

# Momentum used by the inner-loop ablation when --reduced-momentum is set.
REDUCED_BETA_INNER = 0.8
REDUCED_BETA_OUTER = 0.4


def base_algorithm(config: ExperimentConfig) -> AlgorithmConfig:
    """First IDEAL entry of the experiment, else IDEAL with AGD inner"""
    for algorithm in config.algorithms:
        if algorithm.algorithm == "ideal":
            return algorithm
    return AlgorithmConfig(algorithm="ideal", inner_solver="agd")


def ablation_variants(
    base: AlgorithmConfig,
    axis: str,
    values: Sequence[float],
    max_outer: int,
    reduced_momentum: bool = False,
) -> List[AlgorithmConfig]:
    if axis not in AXES:
        raise ConfigError(f"unknown axis {axis!r}, expected {AXES}", "axis")
    if not values:
        raise ConfigError("at least one value is needed", field="values")
    if any(value <= 0 for value in values):
        raise ConfigError("axis values must be positive", field="values")
    base = base.model_copy(update={"max_outer": base.max_outer or max_outer})
    variants = []
    for value in values:
        if axis == "rho":
            update = {
                "rho": None,
                "rho_scale": float(value),
                "inner_solver": "agd",
                "label": f"{base.name}-rho-x{value:g}",
            }
        else:
            if value != int(value):
                raise ConfigError(
                    f"t_inner values must be integers, got {value}",
                    field="values",
                )
            stopping = base.stopping.model_copy(
                update={"option": "II", "t_inner": int(value)}
            )
            update = {"stopping": stopping, "label": f"{base.name}-T{value:g}"}
            if reduced_momentum:
                update["beta_inner"] = REDUCED_BETA_INNER
                update["beta_outer"] = REDUCED_BETA_OUTER
        variants.append(base.model_copy(update=update))
    return variants


def cmd_ablate(
    config_path,
    axis: str,
    values: Sequence[float],
    out: Optional[str] = None,
    seed: Optional[int] = None,
    jobs: int = 1,
    reduced_momentum: bool = False,
) -> int:
    """Sweep IDEAL over multiples of the default rho or over T_k"""
    try:
        config, problem = prepare_experiment(config_path, seed)
        variants = ablation_variants(
            base_algorithm(config),
            axis,
            values,
            config.max_outer,
            reduced_momentum,
        )
    except IdealSimError as e:
        logger.error("Cannot set up the %s ablation: %s", axis, e)
        return EXIT_CONFIG
    out_dir = Path(out or config.output_dir) / f"ablate-{axis}"
    logger.info("Ablating %s over %s", axis, list(values))
    return sweep_and_write(config, problem, variants, out_dir, jobs)


def handle(args: argparse.Namespace) -> int:
    return cmd_ablate(
        args.config,
        args.axis,
        args.values,
        out=args.out,
        seed=args.seed,
        jobs=args.jobs,
        reduced_momentum=args.reduced_momentum,
    )


def register(subparsers, common) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(
        "ablate",
        parents=[common],
        help="ablation over rho multiples or inner budgets",
    )
    parser.add_argument("config", help="experiment JSON file")
    parser.add_argument("--axis", choices=AXES, required=True)
    parser.add_argument(
        "--values",
        type=float,
        nargs="*",
        default=[],
        help="rho multiples of the default, or T_k values",
    )
    parser.add_argument(
        "--reduced-momentum",
        action="store_true",
        help="t_inner axis only: beta_in=0.8, beta_out=0.4",
    )
    parser.set_defaults(handler=handle)
    return parser
