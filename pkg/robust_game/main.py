"""Command-line entry point: python -m robust_game.main <verb> ..."""
import argparse
import logging
import sys
from typing import Optional, Sequence

from robust_game.commands import equilibrium, experiments
from robust_game.errors import RobustGameError
from robust_game.settings import get_settings

logger = logging.getLogger("robust_game")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robust_game",
        description="Robust adaptive control for two-player linear-quadratic games",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    experiments.register(subparsers)
    equilibrium.register(subparsers)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run the verb and map package errors to exit codes."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=get_settings().log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except RobustGameError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
