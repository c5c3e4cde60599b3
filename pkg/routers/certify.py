# routers/certify.py
import logging

import numpy as np

from exceptions import ConfigurationError, NumericalError
from functions.certificates import (case2_threshold, hls_certificate, level_certificate, moser_grid,
                                    moser_norm_report, moser_w, psi_threshold, radial_bound_check)
from functions.continuation import admissible_alpha, tail_kernel_bound_check
from functions.grid import make_grid, sample
from functions.kernel import lemma_G_bounds, make_spec, validate_closed_form
from functions.nonlinearity import check_assumptions
from models.moser import MoserConfig
from routers.common import new_summary, nonlinearity_from, record, store_from, timed
from schema.report import CertResult, RunSummary
from schema.run_config import RunConfig
from utils.artifacts import RunDirectory, plain

logger = logging.getLogger("choquard")


# =================== CERTIFY ===================

def run_certify(cfg: RunConfig, out: RunDirectory) -> RunSummary:
    """Run the selected certificate sets; every set contributes one or more verdicts"""
    summary = new_summary("certify", cfg)
    nl = nonlinearity_from(cfg)
    sets = cfg.certify.sets
    logger.info(f"🚀 certify: {', '.join(sets)}", extra={'color': True})

    if "nonlinearity" in sets:
        with timed(summary, "nonlinearity"):
            report = check_assumptions(nl)
        summary.results["nonlinearity"] = plain(report.model_dump())
        summary.verdicts["nonlinearity"] = report.passed

    if "moser" in sets:
        with timed(summary, "moser"):
            record(summary, "moser", moser_norm_report(cfg.certify.moser_n, nl.rho, cfg.certify.moser_grid_n))
            n0 = case2_threshold()
            record(summary, "case2_threshold", CertResult(name="case2_threshold", passed=n0 is not None,
                                                          value=n0, details={"n_max": 1000}))

    if "kernel" in sets:
        with timed(summary, "kernel"):
            _kernel_set(cfg, summary)

    if "hls" in sets:
        with timed(summary, "hls"):
            record(summary, "hls", hls_certificate(cfg.kernel.alpha, cfg.certify.trials, cfg.certify.seed))

    if "level" in sets:
        with timed(summary, "level"):
            _level_set(cfg, nl, summary, out)

    if "radial" in sets:
        with timed(summary, "radial"):
            grid = make_grid(2048, 30.0, 1.01, 0.25)
            record(summary, "radial_exp", radial_bound_check(sample(grid, lambda r: np.exp(-r))))
            cfg_m = MoserConfig(cfg.certify.level_n, nl.rho)
            w = moser_w(cfg_m, moser_grid(cfg_m))
            record(summary, "radial_moser", radial_bound_check(w, r_from=0.5 * nl.rho))
    return summary


def _kernel_set(cfg: RunConfig, summary: RunSummary):
    alpha = cfg.kernel.alpha
    record(summary, "kernel_bounds", lemma_G_bounds(alpha, beta=min(2.0 * alpha, alpha + 0.5)))
    radii = [1e-4, 0.01, 0.3, 0.99, 1.0, 1.01, 5.0, 40.0]
    try:
        gap = validate_closed_form(alpha, radii, tolerance=1e-8)
        result = CertResult(name="kernel_closed_form", passed=True, value=gap, details={"radii": radii})
    except NumericalError as exc:
        result = CertResult(name="kernel_closed_form", passed=False, value=exc.diagnostics.get("gap"),
                            details=exc.diagnostics)
    record(summary, "kernel_closed_form", result)
    kappa = admissible_alpha(cfg.continuation.omega)
    record(summary, "tail_kernel", tail_kernel_bound_check(0.5 * kappa, cfg.continuation.omega))


def _level_set(cfg: RunConfig, nl, summary: RunSummary, out: RunDirectory):
    cfg_m = MoserConfig(cfg.certify.level_n, nl.rho)
    grid = moser_grid(cfg_m, cfg.certify.level_grid_n)
    store = store_from(cfg)
    n_min = psi_threshold(nl.rho, n_max=1000)
    record(summary, "psi_threshold", CertResult(name="psi_threshold", passed=n_min is not None, value=n_min,
                                                details={"rho": nl.rho, "n_max": 1000}))
    series = []
    for alpha in cfg.certify.level_alphas:
        try:
            op = store.get(grid, make_spec("riesz", alpha))
            cert = level_certificate(cfg_m, nl, alpha, op)
        except ConfigurationError as exc:
            summary.warnings.append(f"level certificate at alpha={alpha:g} not run: {exc.detail}")
            summary.verdicts[f"level_alpha{alpha:g}"] = False
            continue
        key = f"level_alpha{alpha:g}"
        summary.results[key] = plain(cert.model_dump())
        summary.verdicts[key] = cert.passed
        series.append({"x": cert.t_mesh, "y": cert.levels, "label": f"alpha={alpha:g}"})
        out.write_table(f"level_alpha{alpha:g}.csv", {"t": cert.t_mesh, "level": cert.levels,
                                                      "majorant": cert.majorant})
    if series and cfg.output.plots:
        out.plot_lines("level_curves.svg", series, "t", "I(t w_n)", hlines=(0.0, 0.5))
