# routers/continuation.py
import logging

from functions.continuation import geometric_schedule, run_continuation, tail_kernel_bound_check, trace_verdicts
from routers.common import grid_from, new_summary, nonlinearity_from, record, store_from, timed
from schema.report import RunSummary, StepRecord
from schema.run_config import RunConfig
from utils.artifacts import RunDirectory, plain

logger = logging.getLogger("choquard")

# =================== CONTINUE ===================


def run_continue(cfg: RunConfig, out: RunDirectory) -> RunSummary:
    """alpha -> 0+ continuation with the trace CSV and one solution file per step"""
    grid = grid_from(cfg)
    nl = nonlinearity_from(cfg)
    cont = cfg.continuation
    schedule = geometric_schedule(cont.alpha0, cont.steps)
    summary = new_summary("continue", cfg, grid)
    store = store_from(cfg)

    with timed(summary, "continuation"):
        trace = run_continuation(nl, grid, schedule, cfg.solver, cont, store=store)

    steps = [
        StepRecord(alpha=s.alpha, c=s.result.c_level, residual=s.result.residual, dh1=s.dh1,
                   log_residual=s.log_residual, decay_rate=s.decay_rate, decay_m=s.decay_m,
                   energy_log=s.energy_log, norm=s.norm)
        for s in trace.steps
    ]
    summary.results["schedule"] = schedule
    summary.results["steps"] = [plain(s.model_dump()) for s in steps]
    summary.results["failure"] = trace.failure
    for verdict in trace_verdicts(trace, cont):
        record(summary, verdict.name, verdict)

    smallest = trace.steps[-1].alpha if trace.steps else schedule[-1]
    tail = tail_kernel_bound_check(smallest, cont.omega, u=trace.final, nl=nl if trace.final is not None else None)
    if tail.details.get("status"):
        summary.warnings.append(f"tail kernel check skipped: {tail.details['status']}")
        summary.results["tail_kernel"] = plain(tail.model_dump())
    else:
        record(summary, "tail_kernel", tail)

    if steps:
        out.write_table("trace.csv", {
            "alpha": [s.alpha for s in steps],
            "c": [s.c for s in steps],
            "residual": [s.residual for s in steps],
            "dh1": [float("nan") if s.dh1 is None else s.dh1 for s in steps],
            "log_residual": [s.log_residual for s in steps],
            "decay_rate": [float("nan") if s.decay_rate is None else s.decay_rate for s in steps],
        })
        for k, s in enumerate(trace.steps):
            out.write_profile(f"solution_{k:02d}_alpha{s.alpha:.6g}.csv", s.result.u_star)
        if cfg.output.plots:
            alphas = [s.alpha for s in steps]
            out.plot_lines("trace_levels.svg", [{"x": alphas, "y": [s.c for s in steps], "style": "o-"}],
                           "alpha", "mountain-pass level", hlines=(0.5,))
            if len(steps) > 1:
                out.plot_lines("trace_increments.svg",
                               [{"x": alphas[1:], "y": [s.dh1 for s in steps[1:]], "style": "o-"}],
                               "alpha", "H1 increment", logy=True)
            out.plot_lines("solutions.svg",
                           [{"x": s.result.u_star.grid.nodes, "y": s.result.u_star.values,
                             "label": f"alpha={s.alpha:.4g}"} for s in trace.steps],
                           "r", "u(r)")
    return summary
