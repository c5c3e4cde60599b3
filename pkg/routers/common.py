# routers/common.py
import logging
import time
from contextlib import contextmanager
from typing import Optional

from functions.grid import make_grid
from functions.nonlinearity import make_nonlinearity
from models.grid import RadialGrid
from models.nonlinearity import Nonlinearity
from operator_cache import OperatorStore
from schema.report import CertResult, RunSummary
from schema.run_config import RunConfig
from utils.artifacts import inputs_hash, plain, versions

logger = logging.getLogger("choquard")


def grid_from(cfg: RunConfig) -> RadialGrid:
    g = cfg.grid
    return make_grid(g.n, g.rmax, g.grade, g.core_cut)


def nonlinearity_from(cfg: RunConfig) -> Nonlinearity:
    params = cfg.nonlinearity.model_dump(exclude={"family"})
    return make_nonlinearity(cfg.nonlinearity.family, **params)


def store_from(cfg: RunConfig) -> OperatorStore:
    return OperatorStore(cfg.kernel.cache_dir, workers=cfg.kernel.workers)


def new_summary(command: str, cfg: RunConfig, grid: Optional[RadialGrid] = None) -> RunSummary:
    config = cfg.echo()
    return RunSummary(
        command=command, config=config, inputs_hash=inputs_hash(config),
        grid=grid.describe() if grid is not None else {}, versions=versions(),
        warnings=list(cfg.warnings),
    )


def record(summary: RunSummary, key: str, result: CertResult) -> CertResult:
    """Store a certificate under ``key`` and its verdict"""
    summary.results[key] = plain(result.model_dump())
    summary.verdicts[key] = result.passed
    emoji = "✅" if result.passed else "❌"
    log = logger.info if result.passed else logger.warning
    value = "-" if result.value is None else f"{result.value:.6g}"
    log(f"{emoji} {key}: {'pass' if result.passed else 'FAIL'} (value {value})", extra={'color': True})
    return result


@contextmanager
def timed(summary: RunSummary, phase: str):
    started = time.perf_counter()
    try:
        yield
    finally:
        summary.timings[phase] = round(time.perf_counter() - started, 4)
