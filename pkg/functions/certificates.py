# functions/certificates.py
"""Checks of the closed-form objects behind the level estimate and the decay bounds.

Moser caps w_n, the norm identity ||w_n||^2 = 1 + rho^2 delta_n, the energy
along t w_n against 1/2, the radial and exponential decay bounds and the
planar HLS bound.
"""
import logging
import math
from typing import Optional, Sequence

import numpy as np

from exceptions import ConfigurationError, NonlinearityRangeError, NumericalError
from functions.energy import EnergyFunctional
from functions.grid import h1_norm, lp_norm, make_grid, with_nodes
from functions.kernel import bilinear, build_operator, hls_sharp_constant, make_spec
from functions.nonlinearity import F_eval, f4_threshold, f_eval
from models.grid import RadialFunction, RadialGrid
from models.kernel import ConvolutionOperator
from models.moser import MoserConfig
from models.nonlinearity import Nonlinearity
from schema.report import CertResult, LevelCertificate

logger = logging.getLogger("choquard")

MIN_INNER_NODES = 32
SQRT_HALF = math.sqrt(0.5)
SQRT_TWO = math.sqrt(2.0)
RADIAL_CONSTANT = 1.0 / math.sqrt(2.0 * math.pi)


# =================== MOSER FUNCTIONS ===================

def delta_n(n: float) -> float:
    """delta_n = 1/(4 ln n) - 1/(4 n^2 ln n) - 1/(2 n^2)"""
    ln_n = math.log(n)
    return 1.0 / (4.0 * ln_n) - 1.0 / (4.0 * n * n * ln_n) - 1.0 / (2.0 * n * n)


def moser_norm_closed(cfg: MoserConfig) -> float:
    """Exact squared H^1 norm 1 + rho^2 delta_n"""
    return 1.0 + cfg.rho ** 2 * delta_n(cfg.n)


def moser_grid(cfg: MoserConfig, n_nodes: int = 1024, r_max: float = 1.0, grade: float = 1.03,
               core_cut: float = 0.25) -> RadialGrid:
    """Grid with both kinks of w_n as nodes and a geometric core over its support"""
    return with_nodes(make_grid(n_nodes, r_max, grade, core_cut), [cfg.inner_radius, cfg.rho])


def moser_w(cfg: MoserConfig, grid: RadialGrid) -> RadialFunction:
    """
    Sample w_n: sqrt(ln n / 2pi) on r <= rho/n, ln(rho/r)/sqrt(2 pi ln n) up to rho, 0 beyond.

    Kink radii are inserted into the grid when missing, so the result may live
    on a refined copy of ``grid``.
    """
    grid = with_nodes(grid, [cfg.inner_radius, cfg.rho])
    r = grid.nodes
    inner = int(np.count_nonzero((r > 0.0) & (r <= cfg.inner_radius * (1.0 + 1e-12))))
    if inner < MIN_INNER_NODES:
        raise ConfigurationError(
            f"grid resolves rho/n = {cfg.inner_radius:.3e} with {inner} nodes, need {MIN_INNER_NODES}",
            {"n": cfg.n, "rho": cfg.rho, "inner_nodes": inner},
        )
    ln_n = math.log(cfg.n)
    values = np.zeros_like(r)
    core = r <= cfg.inner_radius
    ring = (r > cfg.inner_radius) & (r < cfg.rho)
    values[core] = cfg.peak
    values[ring] = np.log(cfg.rho / r[ring]) / math.sqrt(2.0 * math.pi * ln_n)
    return RadialFunction(grid, values)


# =================== LEVEL ESTIMATE ===================

def psi_n(t, cfg: MoserConfig):
    """Analytic majorant (1 + rho^2 delta_n) t^2/2 - n^(4(t^2 - 1))/(2 ln n), in log space"""
    t = np.asarray(t, dtype=np.float64)
    ln_n = math.log(cfg.n)
    growth = np.exp(np.minimum(4.0 * (t * t - 1.0) * ln_n - math.log(2.0 * ln_n), 700.0))
    out = moser_norm_closed(cfg) * t * t / 2.0 - growth
    return float(out) if out.ndim == 0 else out


def t_n_squared(cfg: MoserConfig) -> float:
    """Maximizer of psi_n: t_n^2 = 1 + (ln(1 + rho^2 delta_n) - ln 4)/(4 ln n)"""
    return 1.0 + (math.log(moser_norm_closed(cfg)) - math.log(4.0)) / (4.0 * math.log(cfg.n))


def psi_threshold(rho: float, n_max: int = 100000) -> Optional[int]:
    """Smallest n0 with psi_n(t_n) < 1/2 and t_n in [sqrt(1/2), sqrt(2)] for every n0 <= n <= n_max"""
    good = []
    for n in range(2, n_max + 1):
        cfg = MoserConfig(n, rho)
        t2 = t_n_squared(cfg)
        ok = 0.5 <= t2 <= 2.0 and psi_n(math.sqrt(t2), cfg) < 0.5 if t2 > 0 else False
        good.append(ok)
    good = np.asarray(good)
    if not good[-1]:
        return None
    bad = np.flatnonzero(~good)
    return int(bad[-1] + 3) if bad.size else 2


def case2_threshold(n_max: int = 1000, t_mesh: Optional[np.ndarray] = None) -> Optional[int]:
    """Smallest n0 with g(n, t) = n^(4(t^2 - 1))/(t^4 ln n) >= 1 for all mesh t >= sqrt(2), n0 <= n <= n_max"""
    t = np.linspace(SQRT_TWO, 10.0, 2001) if t_mesh is None else np.asarray(t_mesh, dtype=np.float64)
    t = t[t >= SQRT_TWO]
    n = np.arange(2, n_max + 1, dtype=np.float64)[:, None]
    log_g = 4.0 * (t[None, :] ** 2 - 1.0) * np.log(n) - 4.0 * np.log(t[None, :]) - np.log(np.log(n))
    good = np.all(log_g >= 0.0, axis=1)
    if not good[-1]:
        return None
    bad = np.flatnonzero(~good)
    return int(bad[-1] + 3) if bad.size else 2


def level_certificate(cfg: MoserConfig, nl: Nonlinearity, alpha: float, op: ConvolutionOperator,
                      t_mesh: Optional[np.ndarray] = None) -> LevelCertificate:
    """
    Energy along the ray t w_n against the value 1/2.

    Verdicts:
        level: max over the mesh of I_alpha(t w_n) < 1/2
        psi: psi_n(t_n) < 1/2 with t_n in [sqrt(1/2), sqrt(2)] and n >= the reported threshold
        majorant: I_alpha(t w_n) <= t^2 ||w_n||^2/2 - (ln 2/2)(integral of F(t w_n))^2 on the mesh
    """
    threshold = f4_threshold(cfg.rho)
    if not nl.beta > threshold:
        raise ConfigurationError(
            f"beta={nl.beta} does not exceed 1/(rho^2 sqrt(ln 2) pi^1.5) = {threshold:.4f}",
            {"key": "nonlinearity.beta", "threshold": threshold},
        )
    epsilon = 0.5 * (nl.beta - threshold)

    w = moser_w(cfg, op.grid)
    if w.grid is not op.grid:
        raise ConfigurationError("operator grid lacks the Moser kink nodes; build it on moser_grid()",
                                 {"n": cfg.n, "rho": cfg.rho})
    functional = EnergyFunctional(nl, op, alpha)
    norm_sq = h1_norm(w) ** 2

    mesh = np.linspace(0.0, 3.0, 601) if t_mesh is None else np.sort(np.asarray(t_mesh, dtype=np.float64))
    notes = []
    truncated_at = None
    levels, majorant, psi_vals, kept = [], [], [], []
    for t in mesh:
        try:
            level = functional.value(t * w.values)
            mass = float(np.dot(w.grid.weights, F_eval(nl, t * w.values)))
        except (NonlinearityRangeError, NumericalError):
            truncated_at = float(t)
            notes.append(f"mesh truncated at t={t:.4g}: nonlinearity range exceeded")
            break
        kept.append(float(t))
        levels.append(level)
        majorant.append(0.5 * t * t * norm_sq - 0.5 * math.log(2.0) * mass * mass)
        psi_vals.append(float(psi_n(t, cfg)) if SQRT_HALF <= t <= SQRT_TWO else None)

    if not kept:
        raise NumericalError("level certificate mesh is empty", {"n": cfg.n})
    levels_arr = np.asarray(levels)
    idx = int(np.argmax(levels_arr))
    if levels_arr[-1] >= 0.0:
        notes.append("mesh does not reach a negative level; the ray maximum may lie beyond it")

    t2 = t_n_squared(cfg)
    t_n = math.sqrt(t2) if t2 > 0 else 0.0
    psi_max = float(psi_n(t_n, cfg))
    n_min = psi_threshold(cfg.rho, n_max=max(1000, cfg.n))
    verdict_psi = bool(psi_max < 0.5 and SQRT_HALF <= t_n <= SQRT_TWO and n_min is not None and cfg.n >= n_min)

    slack = 1e-10 * max(1.0, float(np.max(np.abs(levels_arr))))
    verdict_majorant = bool(np.all(levels_arr <= np.asarray(majorant) + slack))

    # t_eps: beyond it t F(t) >= (beta - eps) e^(a t^2) on the sampled range
    sample_t = np.linspace(0.05, nl.effective_max * (1.0 - 1e-9), 2000)
    log_ratio = np.log(sample_t) + np.log(np.maximum(F_eval(nl, sample_t), 1e-300)) - nl.a * sample_t ** 2
    ok = log_ratio >= math.log(nl.beta - epsilon)
    t_eps = None
    if ok[-1]:
        bad = np.flatnonzero(~ok)
        t_eps = float(sample_t[bad[-1] + 1]) if bad.size else float(sample_t[0])

    cert = LevelCertificate(
        n=cfg.n, rho=cfg.rho, alpha=alpha, t_mesh=kept, levels=levels, max_level=float(levels_arr[idx]),
        t_at_max=kept[idx], psi_values=psi_vals, majorant=majorant, t_n=t_n, psi_at_t_n=psi_max,
        n_min=n_min, truncated_at=truncated_at, threshold=threshold, epsilon=epsilon, t_eps=t_eps,
        verdict_level=bool(levels_arr[idx] < 0.5), verdict_psi=verdict_psi,
        verdict_majorant=verdict_majorant, notes=notes,
    )
    emoji = "✅" if cert.passed else "❌"
    logger.info(f"{emoji} level certificate n={cfg.n} alpha={alpha:g}: max level {cert.max_level:.6f} "
                f"at t={cert.t_at_max:.4f}, psi(t_n)={psi_max:.6f}", extra={'color': True})
    return cert


# =================== DECAY ===================

def radial_bound_check(u: RadialFunction, r_from: float = 1.0) -> CertResult:
    """
    sup over r >= r_from of |u(r)| r^(1/2) / ||u||.

    Always passes when finite; ``within_constant`` compares the value with
    1/sqrt(2 pi), the constant for profiles vanishing at infinity.
    """
    norm = h1_norm(u)
    if norm == 0.0:
        raise ConfigurationError("radial bound check needs u != 0")
    r = u.grid.nodes
    mask = r >= r_from
    scaled = np.abs(u.values[mask]) * np.sqrt(r[mask]) / norm
    if scaled.size == 0:
        return CertResult(name="radial_bound", passed=True, value=0.0, details={"r_from": r_from})
    idx = int(np.argmax(scaled))
    value = float(scaled[idx])
    return CertResult(
        name="radial_bound", passed=bool(math.isfinite(value)), value=value,
        details={"r_from": r_from, "witness_r": float(r[mask][idx]), "norm": norm,
                 "constant": RADIAL_CONSTANT, "within_constant": bool(value <= RADIAL_CONSTANT * (1.0 + 1e-3))},
    )


def decay_certificate(u: RadialFunction, r_fit: float, nl: Optional[Nonlinearity] = None) -> CertResult:
    """
    Fit ln u(r) ~ ln M - rate r on [r_fit, r_max/2].

    Passes when rate >= 0.45 and u(r) <= 1.05 M e^(-r/2) on the window. With a
    nonlinearity, also reports the radius beyond which f(u) <= 3u/4.
    """
    r = u.grid.nodes
    r_end = 0.5 * u.grid.r_max
    if not r_fit < r_end:
        raise ConfigurationError(f"decay fit start {r_fit} must lie below r_max/2 = {r_end}", {"r_fit": r_fit})
    window = (r >= r_fit) & (r <= r_end)
    tail = u.values[window]
    if window.sum() < 3 or np.any(tail <= 0.0):
        return CertResult(name="decay", passed=False, details={"status": "not applicable: nonpositive tail",
                                                                "r_fit": r_fit})
    slope, intercept = np.polyfit(r[window], np.log(tail), 1)
    m_fit, rate = float(math.exp(intercept)), float(-slope)
    envelope_ok = bool(np.all(tail <= 1.05 * m_fit * np.exp(-0.5 * r[window])))
    details = {"M_fit": m_fit, "rate_fit": rate, "r_fit": r_fit, "r_end": r_end, "envelope_ok": envelope_ok}

    if nl is not None:
        pos = np.maximum(u.values, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(pos > 0.0, f_eval(nl, pos) / np.where(pos > 0.0, pos, 1.0), 0.0)
        bad = np.flatnonzero(ratio > 0.75)
        details["linear_tail_from"] = float(r[bad[-1] + 1]) if bad.size and bad[-1] + 1 < r.size else (
            float(r[0]) if not bad.size else None)

    return CertResult(name="decay", passed=bool(rate >= 0.45 and envelope_ok), value=rate, details=details)


# =================== HLS ===================

def _random_profile(rng: np.random.Generator, r: np.ndarray) -> np.ndarray:
    centers = rng.uniform(0.0, 4.0, size=3)
    widths = rng.uniform(0.2, 2.0, size=3)
    amps = rng.uniform(0.0, 1.0, size=3)
    return np.sum(amps[:, None] * np.exp(-((r[None, :] - centers[:, None]) / widths[:, None]) ** 2), axis=0)


def hls_quotient(op: ConvolutionOperator, g: np.ndarray, h: np.ndarray) -> float:
    """Double integral of g h |x - y|^(-alpha) over the product of L^(4/(4-alpha)) norms"""
    alpha = op.spec.alpha
    p = 4.0 / (4.0 - alpha)
    ng = lp_norm(RadialFunction(op.grid, g), p)
    nh = lp_norm(RadialFunction(op.grid, h), p)
    if ng == 0.0 or nh == 0.0:
        return 0.0
    return bilinear(op, g, h) / (ng * nh)


def hls_certificate(alpha: float, trials: int = 50, seed: int = 12345, grid: Optional[RadialGrid] = None,
                    op: Optional[ConvolutionOperator] = None) -> CertResult:
    """Random nonnegative radial pairs against the bound 2 sqrt(pi)"""
    if op is None:
        grid = grid or make_grid(768, 12.0, 1.02, 0.25)
        op = build_operator(grid, make_spec("riesz", alpha))
    rng = np.random.default_rng(seed)
    r = op.grid.nodes
    quotients = []
    for _ in range(trials):
        quotients.append(hls_quotient(op, _random_profile(rng, r), _random_profile(rng, r)))
    bound = 2.0 * math.sqrt(math.pi)
    worst = max(quotients) if quotients else 0.0
    return CertResult(
        name="hls", passed=bool(worst <= bound * (1.0 + 1e-3)), value=worst, seed=seed,
        details={"alpha": alpha, "trials": trials, "bound": bound, "sharp_constant": hls_sharp_constant(alpha),
                 "quotients": quotients},
    )


def moser_norm_report(ns: Sequence[int], rho: float = 0.2, n_nodes: int = 20000) -> CertResult:
    """Quadrature norm of w_n against 1 + rho^2 delta_n for several n"""
    rows = {}
    worst = 0.0
    base = make_grid(n_nodes, 1.0, 1.01, 0.25)
    for n in ns:
        cfg = MoserConfig(int(n), rho)
        w = moser_w(cfg, base)
        numeric = h1_norm(w) ** 2
        closed = moser_norm_closed(cfg)
        rel = abs(numeric - closed) / closed
        worst = max(worst, rel)
        rows[str(n)] = {"numeric": numeric, "closed": closed, "delta_n": delta_n(n), "relative_error": rel}
    return CertResult(name="moser", passed=bool(worst <= 1e-4), value=worst, details=rows)
