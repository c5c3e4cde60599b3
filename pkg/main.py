import argparse
import json
import logging
import sys
import time
from typing import Callable, Dict, List, Optional

from config import settings
from exceptions import ChoquardError, UsageError
from routers.certify import run_certify
from routers.continuation import run_continue
from routers.kernel_table import run_kernel_table
from routers.nonlinearity import run_check_nonlinearity
from routers.solve import run_solve
from schema.report import RunSummary
from schema.run_config import RunConfig
from utils.artifacts import RunDirectory
from utils.config_parser import apply_overrides, parse_config
from utils.logging_setup import setup_logging

logger = logging.getLogger("choquard")

EXIT_PASS = 0
EXIT_VERDICT_FAIL = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

# ✅ Subcommand routes
ROUTES: Dict[str, Callable[[RunConfig, RunDirectory], RunSummary]] = {
    "solve": run_solve,
    "continue": run_continue,
    "certify": run_certify,
    "check-nonlinearity": run_check_nonlinearity,
    "kernel-table": run_kernel_table,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="choquard",
        description="Variational solver and certificate checker for the planar logarithmic Choquard equation",
    )
    parser.add_argument("subcommand", choices=sorted(ROUTES), help="pipeline to run")
    parser.add_argument("-c", "--config", help="flat 'section.key = value' config file")
    parser.add_argument("-o", "--out", help="output root (overrides output.dir)")
    parser.add_argument("-s", "--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config key; repeatable")
    parser.add_argument("--log-level", help="console and file log level")
    parser.add_argument("--no-plots", action="store_true", help="skip SVG output")
    return parser


def _overrides(pairs: List[str]) -> Dict[str, str]:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise UsageError(f"--set expects SECTION.KEY=VALUE, got '{pair}'", {"value": pair})
        key, value = pair.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def dispatch(subcommand: str, cfg: RunConfig, out: Optional[RunDirectory] = None) -> RunSummary:
    """Run one subcommand pipeline and write its summary; returns the summary"""
    if subcommand not in ROUTES:
        raise UsageError(f"unknown subcommand '{subcommand}'", {"allowed": sorted(ROUTES)})
    out = out or RunDirectory(cfg.output.dir, subcommand)
    started = time.perf_counter()
    logger.info(f"🚀 {subcommand} started, output in {out.path}", extra={'color': True})
    summary = ROUTES[subcommand](cfg, out)
    summary.timings["total"] = round(time.perf_counter() - started, 4)
    out.write_summary(summary)
    failed = [name for name, ok in summary.verdicts.items() if not ok]
    if failed:
        logger.warning(f"❌ {subcommand}: failed verdicts {', '.join(failed)}", extra={'color': True})
    else:
        logger.info(f"✅ {subcommand}: all {len(summary.verdicts)} verdicts pass", extra={'color': True})
    return summary


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_USAGE

    setup_logging(level=args.log_level)
    out: Optional[RunDirectory] = None
    try:
        cfg = parse_config(args.config)
        overrides = _overrides(args.set)
        if args.out:
            overrides["output.dir"] = args.out
        if args.no_plots:
            overrides["output.plots"] = "false"
        if overrides:
            cfg = apply_overrides(cfg, overrides)
        if settings.CHOQUARD_CACHE:
            logger.info(f"📁 operator cache from CHOQUARD_CACHE: {settings.CHOQUARD_CACHE}")
        out = RunDirectory(cfg.output.dir, args.subcommand)
        summary = dispatch(args.subcommand, cfg, out)
    except ChoquardError as exc:
        logger.error(f"❌ {type(exc).__name__}: {exc.detail}", extra={'color': True})
        _write_error(exc, out, args)
        return exc.exit_code
    except Exception as exc:
        logger.error(f"💥 unexpected failure: {exc}", exc_info=True, extra={'color': True})
        return EXIT_NUMERICAL
    return EXIT_PASS if summary.passed else EXIT_VERDICT_FAIL


def _write_error(exc: ChoquardError, out: Optional[RunDirectory], args):
    if out is not None:
        out.write_error(exc)
        return
    # failed before the run directory existed
    root = args.out or "runs"
    try:
        target = RunDirectory(root, f"{args.subcommand}-error")
        target.write_error(exc)
    except OSError:
        print(json.dumps(exc.to_record(), default=str), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
