# routers/solve.py
import logging

import numpy as np

from exceptions import NonlinearityRangeError, NumericalError
from functions.energy import EnergyFunctional, ar_growth_profile, mountain_pass_ring
from functions.kernel import make_spec
from functions.nonlinearity import check_assumptions
from functions.solver import bump_profile, cerami_diagnostics, mountain_pass
from routers.common import grid_from, new_summary, nonlinearity_from, record, store_from, timed
from schema.report import RunSummary
from schema.run_config import RunConfig
from utils.artifacts import RunDirectory, plain

logger = logging.getLogger("choquard")

# =================== SOLVE ===================


def run_solve(cfg: RunConfig, out: RunDirectory) -> RunSummary:
    """Mountain-pass solve at kernel.alpha with geometry checks and Cerami diagnostics"""
    grid = grid_from(cfg)
    nl = nonlinearity_from(cfg)
    alpha = cfg.kernel.alpha
    summary = new_summary("solve", cfg, grid)

    with timed(summary, "assumptions"):
        report = check_assumptions(nl)
    summary.results["assumptions"] = plain(report.model_dump())
    summary.verdicts["assumptions"] = report.passed
    if not report.passed:
        summary.warnings.append(f"nonlinearity fails {', '.join(report.failed())}")

    if not cfg.solver.enabled:
        summary.warnings.append("solver.enabled = false, nothing solved")
        return summary

    store = store_from(cfg)
    with timed(summary, "operator"):
        op = store.get(grid, make_spec("riesz", alpha))

    with timed(summary, "solve"):
        result = mountain_pass(nl, alpha, grid, cfg.solver, op=op)
    summary.results["solve"] = plain(result.summary())
    summary.verdicts["converged"] = result.converged
    summary.verdicts["positive"] = result.positivity_flag
    summary.verdicts["level_below_half"] = bool(0.0 < result.c_level < 0.5)

    with timed(summary, "diagnostics"):
        diag = cerami_diagnostics(result.u_star, nl, alpha, op=op, level=result.c_level,
                                  workers=cfg.solver.workers)
        radius = 0.5 * min(1.0, float(np.sqrt(2.0 * max(result.c_level, 1e-12))))
        record(summary, "mountain_pass_ring", mountain_pass_ring(nl, op, alpha, radius, seed=cfg.certify.seed))
        e0 = bump_profile(grid)
        try:
            record(summary, "ar_growth", ar_growth_profile(nl, e0, np.linspace(1.0, 4.0, 61)))
        except (NonlinearityRangeError, NumericalError) as exc:
            summary.warnings.append(f"AR growth profile skipped: {exc.detail}")
    summary.results["cerami"] = plain(diag.model_dump())
    summary.verdicts["cerami"] = diag.passed

    out.write_profile("solution.csv", result.u_star)
    if cfg.output.plots:
        _plots(out, result, nl, op, alpha)
    return summary


def _plots(out: RunDirectory, result, nl, op, alpha: float):
    u = result.u_star
    out.plot_lines("solution.svg", [{"x": u.grid.nodes, "y": u.values, "label": f"alpha={alpha:g}"}],
                   "r", "u(r)", title="mountain-pass solution")

    functional = EnergyFunctional(nl, op, alpha)
    e0 = bump_profile(u.grid)
    t_max = max(result.endpoint_scale, 1.0)
    ts, levels = [], []
    for t in np.linspace(0.0, t_max, 121):
        try:
            levels.append(functional.value(t * e0.values))
        except (NonlinearityRangeError, NumericalError):
            break
        ts.append(t)
    out.plot_lines("energy_levels.svg", [{"x": ts, "y": levels, "label": "I(t e0)"}], "t", "energy",
                   hlines=(0.0, result.c_level, 0.5))
    if result.path_levels:
        out.plot_lines("path_levels.svg", [{"x": np.arange(1, len(result.path_levels) + 1), "y": result.path_levels}],
                       "iteration", "path maximum")
