# routers/kernel_table.py
import numpy as np

from functions.kernel import hls_sharp_constant, kernel_limit_gap, kernel_table
from routers.common import new_summary
from schema.report import RunSummary
from schema.run_config import RunConfig
from utils.artifacts import RunDirectory


def run_kernel_table(cfg: RunConfig, out: RunDirectory) -> RunSummary:
    """Angular averages of the riesz, G_alpha and log kernels on an (r, s) mesh"""
    alpha = cfg.kernel.alpha
    summary = new_summary("kernel-table", cfg)
    mesh = np.geomspace(1e-3, cfg.grid.rmax, 41)
    table = kernel_table(alpha, mesh, mesh)
    out.write_table(f"kernel_alpha{alpha:g}.csv", table)

    gap = kernel_limit_gap(alpha)
    summary.results.update({"alpha": alpha, "points": int(table["r"].size), "limit_gap": gap,
                            "hls_sharp_constant": hls_sharp_constant(alpha)})
    summary.verdicts["finite"] = bool(np.all(np.isfinite(table["riesz"])) and np.all(np.isfinite(table["log"])))
    if cfg.output.plots:
        s = np.linspace(0.05, 5.0, 400)
        diagonal = kernel_table(alpha, [1.0], s)
        out.plot_lines("kernel_slice.svg", [
            {"x": s, "y": diagonal["galpha"], "label": "G_alpha average, r = 1"},
            {"x": s, "y": diagonal["log"], "label": "log average, r = 1", "style": "--"},
        ], "s", "angular average")
    return summary
