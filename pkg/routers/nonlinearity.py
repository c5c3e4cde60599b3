# routers/nonlinearity.py
import logging

import numpy as np

from exceptions import ConfigurationError
from functions.nonlinearity import check_assumptions, default_mesh, evaluate_all, f5_constants, growth_ratio
from routers.common import new_summary, nonlinearity_from, timed
from schema.report import RunSummary
from schema.run_config import RunConfig
from utils.artifacts import RunDirectory, plain

logger = logging.getLogger("choquard")


# =================== CHECK-NONLINEARITY ===================

def run_check_nonlinearity(cfg: RunConfig, out: RunDirectory) -> RunSummary:
    """Audit (f1)-(f4) for the configured family and tabulate F, f, f' and the quotient"""
    nl = nonlinearity_from(cfg)
    summary = new_summary("check-nonlinearity", cfg)

    with timed(summary, "assumptions"):
        report = check_assumptions(nl)
    summary.results["assumptions"] = plain(report.model_dump())
    for entry in report.checks:
        summary.verdicts[entry.name] = entry.passed
        if not entry.passed:
            logger.warning(f"❌ {entry.name}: {entry.note or 'failed'} (witness t={entry.witness_t})",
                           extra={'color': True})
    try:
        summary.results["f5"] = f5_constants(nl)
    except ConfigurationError as exc:
        summary.warnings.append(f"f5 constants skipped: {exc.detail}")

    mesh = default_mesh(nl, samples=800)
    big_f, small_f, f_prime = evaluate_all(nl, mesh)
    ratio = growth_ratio(nl, mesh)
    out.write_table("nonlinearity.csv", {"t": mesh, "F": big_f, "f": small_f, "fprime": f_prime, "ratio": ratio})
    if cfg.output.plots:
        out.plot_lines("quotient.svg", [{"x": mesh, "y": ratio, "label": "F f'/f^2"}], "t", "quotient",
                       hlines=(nl.tau, 1.0, nl.c_upper))
        positive = small_f > 0
        out.plot_lines("growth.svg", [{"x": mesh[positive], "y": small_f[positive], "label": "f"},
                                      {"x": mesh[positive], "y": np.maximum(big_f[positive], 1e-300),
                                       "label": "F", "style": "--"}],
                       "t", "value", logy=True)
    logger.info(f"📊 {nl.family}: {len(report.checks) - len(report.failed())}/{len(report.checks)} checks pass")
    return summary
