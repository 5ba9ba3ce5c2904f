"""
================================================================================
oqs_eom/main.py - command-line entry point
================================================================================

    oqs-eom <command> [--config PATH] [--out PATH] [--format record|table]
                      [--threads N] [--seed N]

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 acceptance
violation (the record is still written).
"""

from pathlib import Path
from typing import List, Optional
import argparse
import logging
import sys

from oqs_eom.config import Config
from oqs_eom.commands import COMMANDS, run_command
from oqs_eom.errors import AcceptanceError, ConfigError, OQSError
from oqs_eom.persistence import save_record, save_table
from oqs_eom.schemas import parse_config

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oqs-eom",
        description="Reduced open-system dynamics through the frequency-dependent effective Liouville",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "verify": "resolvent-identity residual suite over a frequency grid",
        "evolve": "exact oracle and inverse-Laplace trajectories with comparison",
        "freq-sweep": "rho(z) and spectra of L(z) over a frequency grid",
        "spectrum": "eigensystem and zero-mode projector of L(z) at one z",
        "longtime": "long-time limit by formula, extrapolation and oracle",
        "diagnose": "heuristic timescales and observed relaxation",
        "catalog": "list the catalog models or dump one model's matrices",
    }
    for name in COMMANDS:
        cmd = sub.add_parser(name, help=helps[name])
        cmd.add_argument("--config", help="YAML run configuration", required=name != "catalog")
        cmd.add_argument("--out", help="output path (stdout when omitted)")
        cmd.add_argument("--format", choices=["record", "table"], default="record")
        cmd.add_argument("--threads", type=int, default=None, help=f"worker threads (default {Config.THREADS})")
        cmd.add_argument("--seed", type=int, default=None, help="override the catalog seed")
    return parser


def _load_config(path: Optional[str], seed: Optional[int]):
    if path is None:
        return None
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    return parse_config(text, seed=seed)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=Config.LOG_LEVEL, format="%(levelname)s %(name)s: %(message)s")

    if args.threads is not None and args.threads < 1:
        logger.error("❌ --threads must be at least 1")
        return ConfigError.exit_code

    try:
        cfg = _load_config(args.config, args.seed)
        result = run_command(args.command, cfg, threads=args.threads)
    except OQSError as e:
        logger.error(f"❌ {args.command} failed: {e}", exc_info=logger.isEnabledFor(logging.DEBUG))
        return e.exit_code

    if args.format == "table":
        if result.table is None:
            logger.error(f"❌ {args.command} has no tabular export")
            return ConfigError.exit_code
        save_table(result.table, args.out)
    else:
        save_record(result.record, args.out)

    if result.violations:
        for violation in result.violations:
            logger.error(f"❌ acceptance: {violation}")
        return AcceptanceError.exit_code
    logger.info(f"✅ {args.command} finished")
    return 0


if __name__ == "__main__":
    sys.exit(main())
