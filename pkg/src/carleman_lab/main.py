import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from carleman_lab.config import DEFAULT_THREADS
from carleman_lab.pipeline import run_file
from carleman_lab.stages import STAGE_ORDER


# Set up logging for the application
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

STAGE_CHOICES = STAGE_ORDER + ["all"]


def _seed(value: str) -> int:
    seed = int(value)
    if not 0 <= seed < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {value}")
    return seed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="carleman_lab",
        description="Carleman construction checks and weighted resolvent sweeps driven by a TOML experiment file.",
    )
    parser.add_argument("command", nargs="?", choices=STAGE_CHOICES, help="Stage to run (default: all)")
    parser.add_argument("--config", required=True, type=Path, help="Experiment TOML file")
    parser.add_argument("--stage", choices=STAGE_CHOICES, help="Stage to run; same as the positional command")
    parser.add_argument("--out", help="Output directory (overrides the config file)")
    parser.add_argument("--threads", type=int, default=DEFAULT_THREADS, help="Worker threads for sweeps")
    parser.add_argument("--seed", type=_seed, help="Seed overriding [experiment].seed")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command and args.stage and args.command != args.stage:
        parser.error(f"conflicting stages: {args.command} and --stage {args.stage}")
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    stage = args.stage or args.command or "all"
    logger.info(f"Running stage {stage} from {args.config}")
    return run_file(args.config, stage=stage, out=args.out, threads=args.threads, seed=args.seed)


if __name__ == "__main__":
    # Entry point for the application
    sys.exit(main())
