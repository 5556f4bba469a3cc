import argparse
import asyncio
import logging
import sys
from typing import List, Optional

from src.core.config import load_config, settings
from src.core.exceptions import ConfigError
from src.core.logger import setup_logging
from src.core.orchestrator import EXIT_ERROR, ExperimentOrchestrator

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lagflow", description="Lagrangian JKO solver for 1D nonlinear drift-diffusion")
    parser.add_argument("--log-level", default=None, help="overrides LOG_LEVEL")
    parser.add_argument("--no-pdf", action="store_true", help="skip the run briefing PDF")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run one experiment and audit it")
    solve.add_argument("config")

    converge = sub.add_parser("converge", help="mesh or time-step convergence study")
    converge.add_argument("config")
    converge.add_argument("--axis", choices=["grid", "timestep"], required=True)
    converge.add_argument("--levels", type=float, nargs="+", required=True)
    converge.add_argument("--reference", type=float, required=True)

    check = sub.add_parser("audit", help="re-audit a finished run directory")
    check.add_argument("run_dir")
    return parser


async def dispatch(args: argparse.Namespace) -> int:
    orchestrator = ExperimentOrchestrator(write_pdf=not args.no_pdf)
    if args.command == "audit":
        return await orchestrator.run_audit(args.run_dir)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.command == "solve":
        return await orchestrator.run_solve(cfg)
    return await orchestrator.run_convergence(cfg, args.axis, args.levels, args.reference)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    logger.info(f"LagFlow ({settings.ENVIRONMENT}): {args.command}")
    return asyncio.run(dispatch(args))


if __name__ == "__main__":
    sys.exit(main())
