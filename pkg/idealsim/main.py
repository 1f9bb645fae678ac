import argparse
import logging
import sys
from typing import List, Optional

from idealsim import __version__, settings
from idealsim.commands import EXIT_CONFIG, ablate, run, validate


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="idealsim",
        description="Decentralized optimization simulator",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory for artifacts")
    common.add_argument(
        "--seed", type=int, help="master seed, overrides the config"
    )
    common.add_argument(
        "--jobs", type=int, default=1, help="parallel (algorithm, tau) runs"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    run.register(subparsers, common)
    ablate.register(subparsers, common)
    validate.register(subparsers, common)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=settings.LOG_LEVEL, format=settings.LOG_FORMAT)
    args = build_parser().parse_args(argv)
    if args.seed is not None and args.seed < 0:
        logging.getLogger(__name__).error("--seed must be >= 0")
        return EXIT_CONFIG
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
