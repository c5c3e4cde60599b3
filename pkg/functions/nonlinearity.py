# functions/nonlinearity.py
"""Nonlinearity families and the audit of their growth assumptions.

All families are evaluated in log space: with F = exp(phi) on t > 0,

    f  = F phi'
    f' = F (phi'' + phi'^2)
    F f' / f^2 = 1 + phi'' / phi'^2

so nothing overflows below ``domain_max``.
"""
import logging
import math
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import integrate

from exceptions import ConfigurationError, NonlinearityRangeError, NumericalError
from models.nonlinearity import EXAMPLE_SINGULARITY, FAMILIES, Nonlinearity
from schema.report import AssumptionReport, CheckEntry

logger = logging.getLogger("choquard")

FOUR_PI = 4.0 * math.pi


# =================== CONSTRUCTION ===================

def make_nonlinearity(family: str = "exp_critical", **params) -> Nonlinearity:
    """Build a family with its declared constants; explicit params override defaults"""
    if family not in FAMILIES:
        raise ConfigurationError(
            f"Unknown nonlinearity family '{family}'", {"key": "nonlinearity.family", "allowed": list(FAMILIES)}
        )
    params = {k: v for k, v in params.items() if v is not None}

    if family == "power":
        q = float(params.get("q", 3.0))
        if q <= 2.0:
            raise ConfigurationError(f"power family needs q > 2, got {q}", {"key": "nonlinearity.q"})
        defaults = dict(q=q, tau=0.9 * (q - 1.0) / q, c_upper=1.5, p=q + 1.0, beta=1000.0)
    elif family == "exp_critical":
        defaults = dict(q=3.0, tau=0.6, c_upper=1.1, p=4.0, beta=1000.0)
    else:
        defaults = dict(q=2.0, tau=0.4, c_upper=2.5, p=3.0, beta=1000.0)

    defaults.update(params)
    nl = Nonlinearity(family=family, **defaults)

    if not 0.0 < nl.tau < 1.0 < nl.c_upper:
        raise ConfigurationError(
            f"Declared constants must satisfy C > 1 > tau > 0, got tau={nl.tau}, C={nl.c_upper}",
            {"key": "nonlinearity.tau"},
        )
    if not 0.0 < nl.rho < 0.25:
        raise ConfigurationError(f"nonlinearity.rho must lie in (0, 1/4), got {nl.rho}", {"key": "nonlinearity.rho"})
    if nl.kappa <= 0 or nl.domain_max <= 0:
        raise ConfigurationError("nonlinearity.kappa and nonlinearity.domain_max must be positive",
                                 {"key": "nonlinearity.kappa"})
    return nl


# =================== LOG-SPACE CORE ===================

def _log_terms(nl: Nonlinearity, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """phi, phi', phi'' for t > 0"""
    log_k = math.log(nl.kappa)
    if nl.family == "power":
        phi = log_k + nl.q * np.log(t)
        d1 = nl.q / t
        d2 = -nl.q / (t * t)
    elif nl.family == "exp_critical":
        phi = log_k + 3.0 * np.log(t) + nl.a * t * t
        d1 = 3.0 / t + 2.0 * nl.a * t
        d2 = -3.0 / (t * t) + 2.0 * nl.a
    else:
        # F = kappa t^2 e^(a t^2) / D with D = -ln ln(1 + t)
        lg = np.log1p(t)
        big_d = -np.log(lg)
        d_d1 = -1.0 / ((1.0 + t) * lg)
        d_d2 = (lg + 1.0) / ((1.0 + t) ** 2 * lg * lg)
        ratio = d_d1 / big_d
        phi = log_k + 2.0 * np.log(t) + nl.a * t * t - np.log(big_d)
        d1 = 2.0 / t + 2.0 * nl.a * t - ratio
        d2 = -2.0 / (t * t) + 2.0 * nl.a - (d_d2 / big_d - ratio * ratio)
    return phi, d1, d2


def _prepare(nl: Nonlinearity, t) -> Tuple[np.ndarray, np.ndarray, bool]:
    arr = np.asarray(t, dtype=np.float64)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(np.isnan(arr)):
        raise NonlinearityRangeError("Nonlinearity evaluated at NaN", float("nan"))
    top = float(arr.max()) if arr.size else 0.0
    limit = nl.effective_max
    if top > nl.domain_max or (nl.family == "paper_example" and top >= EXAMPLE_SINGULARITY):
        raise NonlinearityRangeError(
            f"{nl.family}: argument {top:.6g} outside the finite range (0, {limit:.6g}]",
            top,
            diagnostics={"family": nl.family, "domain_max": limit},
        )
    return arr, arr > 0.0, scalar


def _finish(out: np.ndarray, scalar: bool):
    return float(out[0]) if scalar else out


def F_eval(nl: Nonlinearity, t):
    """F(t), zero for t <= 0"""
    arr, pos, scalar = _prepare(nl, t)
    out = np.zeros_like(arr)
    if pos.any():
        phi, _, _ = _log_terms(nl, arr[pos])
        out[pos] = np.exp(phi)
    return _finish(out, scalar)


def f_eval(nl: Nonlinearity, t):
    """f(t) = F'(t), zero for t <= 0"""
    arr, pos, scalar = _prepare(nl, t)
    out = np.zeros_like(arr)
    if pos.any():
        phi, d1, _ = _log_terms(nl, arr[pos])
        out[pos] = np.exp(phi) * d1
    return _finish(out, scalar)


def fprime_eval(nl: Nonlinearity, t):
    """f'(t) = F''(t), zero for t <= 0"""
    arr, pos, scalar = _prepare(nl, t)
    out = np.zeros_like(arr)
    if pos.any():
        phi, d1, d2 = _log_terms(nl, arr[pos])
        out[pos] = np.exp(phi) * (d2 + d1 * d1)
    return _finish(out, scalar)


def evaluate_all(nl: Nonlinearity, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """F, f, f' in one pass over an array"""
    arr, pos, _ = _prepare(nl, t)
    big_f = np.zeros_like(arr)
    small_f = np.zeros_like(arr)
    f_prime = np.zeros_like(arr)
    if pos.any():
        phi, d1, d2 = _log_terms(nl, arr[pos])
        e = np.exp(phi)
        big_f[pos] = e
        small_f[pos] = e * d1
        f_prime[pos] = e * (d2 + d1 * d1)
    return big_f, small_f, f_prime


def growth_ratio(nl: Nonlinearity, t):
    """F f' / f^2 for t > 0"""
    arr, pos, scalar = _prepare(nl, t)
    if not pos.all():
        raise NonlinearityRangeError("growth ratio needs t > 0", float(arr.min()))
    _, d1, d2 = _log_terms(nl, arr)
    return _finish(1.0 + d2 / (d1 * d1), scalar)


def quotient_Q(nl: Nonlinearity, t):
    """Q(t) = F(t)/f(t) for t > 0, Q(0) = 0 and (1 - tau) t for t < 0"""
    arr, pos, scalar = _prepare(nl, t)
    out = (1.0 - nl.tau) * np.minimum(arr, 0.0)
    if pos.any():
        _, d1, _ = _log_terms(nl, arr[pos])
        out[pos] = 1.0 / d1
    return _finish(out, scalar)


# =================== AUXILIARY TRANSFORM ===================

def _sqrt_ratio(nl: Nonlinearity, s: float) -> float:
    if s <= 0.0:
        s = 1e-300
    _, d1, d2 = _log_terms(nl, np.array([s]))
    return math.sqrt(max(1.0 + d2[0] / (d1[0] * d1[0]), 0.0))


def H_transform(nl: Nonlinearity, t, epsabs: float = 1e-12, epsrel: float = 1e-10):
    """
    H(t) = integral over [0, t] of sqrt(F f') / f, computed by adaptive quadrature.

    Negative arguments map to 0. Arrays are integrated piecewise between sorted
    sample values and accumulated, so every sample costs one short quadrature.
    """
    arr, _, scalar = _prepare(nl, t)
    clipped = np.maximum(arr, 0.0)
    order = np.argsort(clipped, kind="stable")
    sorted_t = clipped[order]

    out_sorted = np.zeros_like(sorted_t)
    running = 0.0
    previous = 0.0
    for idx, upper in enumerate(sorted_t):
        if upper > previous:
            piece, err = integrate.quad(lambda s: _sqrt_ratio(nl, s), previous, upper,
                                        epsabs=epsabs, epsrel=epsrel, limit=200)
            if not math.isfinite(piece) or err > 1e-8 * max(1.0, upper - previous):
                raise NumericalError(
                    "H transform quadrature did not converge",
                    {"lower": previous, "upper": float(upper), "estimate": piece, "error": err},
                )
            running += piece
            previous = float(upper)
        out_sorted[idx] = running

    out = np.empty_like(out_sorted)
    out[order] = out_sorted
    return _finish(out, scalar)


# =================== ASSUMPTION AUDIT ===================

def f4_threshold(rho: float) -> float:
    """Lower bound 1/(rho^2 sqrt(ln 2) pi^(3/2)) the growth constant beta must exceed"""
    return 1.0 / (rho * rho * math.sqrt(math.log(2.0)) * math.pi ** 1.5)


def f5_constants(nl: Nonlinearity, t0: float = 0.5, samples: int = 2000) -> Dict[str, float]:
    """Smallest M0 with F(t) <= M0 f(t) on [t0, domain_max] (sampled)"""
    upper = nl.effective_max * (1.0 - 1e-9)
    if t0 >= upper:
        raise ConfigurationError(f"t0={t0} is beyond the admissible range", {"t0": t0})
    t = np.linspace(t0, upper, samples)
    q = quotient_Q(nl, t)
    idx = int(np.argmax(q))
    return {"M0": float(q[idx]), "t0": float(t0), "witness_t": float(t[idx])}


def default_mesh(nl: Nonlinearity, samples: int = 4000) -> np.ndarray:
    upper = nl.effective_max
    if nl.family == "paper_example":
        upper *= 1.0 - 1e-6
    inner = np.geomspace(1e-8, 1e-2, samples // 4, endpoint=False)
    outer = np.linspace(1e-2, upper, samples - samples // 4)
    return np.concatenate((inner, outer))


def check_assumptions(nl: Nonlinearity, t_mesh: Optional[np.ndarray] = None) -> AssumptionReport:
    """
    Audit the declared constants of a nonlinearity on a test mesh.

    Args:
        nl: Nonlinearity with declared tau, C, beta, rho, p, t_bar, t_tilde
        t_mesh: Points in (0, domain_max]; a graded default mesh when omitted

    Returns:
        AssumptionReport: one entry per assumption, each with its witness t
    """
    mesh = default_mesh(nl) if t_mesh is None else np.sort(np.asarray(t_mesh, dtype=np.float64))
    if mesh.size == 0 or mesh[0] <= 0:
        raise ConfigurationError("Assumption mesh must be a nonempty subset of (0, domain_max]")
    flags = []
    if nl.family == "paper_example":
        flags.append(f"domain singularity at t = e - 1 = {EXAMPLE_SINGULARITY:.6f}: ln(1/ln(1+t)) vanishes there")
        keep = mesh < EXAMPLE_SINGULARITY
        if not keep.all():
            flags.append(f"mesh truncated below t = {EXAMPLE_SINGULARITY:.6f}")
            mesh = mesh[keep]

    big_f, small_f, f_prime = evaluate_all(nl, mesh)
    ratio = growth_ratio(nl, mesh)
    checks = []

    # ✅ vanishing on the negative axis, F >= 0
    neg = -np.linspace(0.0, 1.0, 11)
    neg_vals = np.concatenate((F_eval(nl, neg), f_eval(nl, neg)))
    checks.append(CheckEntry(
        name="f1_sign", passed=bool(np.all(neg_vals == 0.0) and np.all(big_f >= 0.0)),
        value=float(big_f.min()), bound=0.0, witness_t=float(mesh[int(np.argmin(big_f))]),
        note="F = f = 0 for t <= 0 and F >= 0",
    ))

    # ✅ f(t) = o(t) at 0+
    samples = 10.0 ** -np.arange(2, 9, dtype=np.float64)
    samples = samples[samples < nl.effective_max]
    small = f_eval(nl, samples) / samples
    decreasing = bool(np.all(np.diff(small) < 0.0))
    checks.append(CheckEntry(
        name="f1_small", passed=decreasing and small[-1] <= 0.5 * small[0],
        value=float(small[-1]), bound=float(small[0]), witness_t=float(samples[-1]),
        note="f(t)/t decreases toward 0 along t = 1e-2 ... 1e-8",
    ))

    # ✅ growth envelope near 0 and at infinity
    low = mesh <= nl.t_bar
    high = mesh >= nl.t_tilde
    env_low = np.max(big_f[low] / (nl.c_upper * mesh[low] ** 2)) if low.any() else 0.0
    log_env_high = (math.log(nl.c_upper) + (nl.p - 1.0) * np.log(mesh[high]) + nl.a * mesh[high] ** 2)
    log_f_high = np.log(np.maximum(big_f[high], 1e-300))
    env_high = float(np.max(log_f_high - log_env_high)) if high.any() else -math.inf
    checks.append(CheckEntry(
        name="f1_envelope", passed=bool(env_low <= 1.0 + 1e-12 and env_high <= 1e-12),
        value=float(max(env_low, math.exp(min(env_high, 50.0)))), bound=1.0,
        note=f"F <= C t^2 on t <= {nl.t_bar}, F <= C t^(p-1) e^(a t^2) on t >= {nl.t_tilde}",
    ))

    # ✅ tau <= F f'/f^2 <= C
    lo_idx, hi_idx = int(np.argmin(ratio)), int(np.argmax(ratio))
    checks.append(CheckEntry(
        name="f2_lower", passed=bool(ratio[lo_idx] >= nl.tau), value=float(ratio[lo_idx]),
        bound=nl.tau, witness_t=float(mesh[lo_idx]),
    ))
    checks.append(CheckEntry(
        name="f2_upper", passed=bool(ratio[hi_idx] <= nl.c_upper), value=float(ratio[hi_idx]),
        bound=nl.c_upper, witness_t=float(mesh[hi_idx]),
    ))
    slack = (1.0 - nl.tau) * small_f * mesh - big_f
    worst = int(np.argmin(slack / np.maximum(big_f, 1e-300)))
    checks.append(CheckEntry(
        name="f2_consequence", passed=bool(slack[worst] >= -1e-12 * max(big_f[worst], 1.0)),
        value=float(big_f[worst]), bound=float((1.0 - nl.tau) * small_f[worst] * mesh[worst]),
        witness_t=float(mesh[worst]), note="F(t) <= (1 - tau) f(t) t",
    ))

    # ✅ F f'/f^2 -> 1 and t F(t) e^(-a t^2) bounded below by beta
    tail = mesh >= 0.9 * mesh[-1]
    if nl.family == "paper_example":
        checks.append(CheckEntry(
            name="f3_limit", passed=False, value=float(ratio[-1]), bound=1.0, witness_t=float(mesh[-1]),
            note="not assessable: the domain ends at t = e - 1",
        ))
        checks.append(CheckEntry(
            name="f4_growth", passed=False, bound=f4_threshold(nl.rho), witness_t=float(mesh[-1]),
            note="not assessable: the domain ends at t = e - 1",
        ))
    else:
        checks.append(CheckEntry(
            name="f3_limit", passed=bool(abs(ratio[-1] - 1.0) <= 0.05), value=float(ratio[-1]),
            bound=1.0, witness_t=float(mesh[-1]), note="|F f'/f^2 - 1| <= 0.05 at the mesh end",
        ))
        log_growth = np.log(mesh[tail]) + np.log(np.maximum(big_f[tail], 1e-300)) - nl.a * mesh[tail] ** 2
        terminal = float(np.exp(np.clip(log_growth.min(), -700.0, 700.0)))
        threshold = f4_threshold(nl.rho)
        checks.append(CheckEntry(
            name="f4_growth", passed=bool(nl.beta > threshold and terminal >= nl.beta),
            value=terminal, bound=max(nl.beta, threshold), witness_t=float(mesh[tail][int(np.argmin(log_growth))]),
            note=f"min of t F(t) e^(-a t^2) over the last decade vs beta={nl.beta:g} > {threshold:.4f}",
        ))

    # ✅ f = F', f' = F'' by central differences
    sample_t = mesh[np.linspace(mesh.size // 10, mesh.size - 2, 5).astype(int)]
    worst_rel = 0.0
    for t in sample_t:
        # step scaled by the log-derivative keeps h^2 F'''/F' small at large t
        _, d1, _ = _log_terms(nl, np.array([t]))
        h = 1e-4 / (1.0 + abs(d1[0]))
        if t - h <= 0 or t + h >= nl.effective_max:
            continue
        fd_f = (F_eval(nl, t + h) - F_eval(nl, t - h)) / (2 * h)
        fd_fp = (f_eval(nl, t + h) - f_eval(nl, t - h)) / (2 * h)
        rel_f = abs(fd_f - f_eval(nl, t)) / max(abs(f_eval(nl, t)), 1e-300)
        rel_fp = abs(fd_fp - fprime_eval(nl, t)) / max(abs(fprime_eval(nl, t)), 1e-300)
        worst_rel = max(worst_rel, rel_f, rel_fp)
    checks.append(CheckEntry(
        name="derivatives", passed=worst_rel <= 1e-5, value=worst_rel, bound=1e-5,
        note="central differences of F and f",
    ))

    constants = {"tau": nl.tau, "C": nl.c_upper, "beta": nl.beta, "rho": nl.rho, "p": nl.p,
                 "t_bar": nl.t_bar, "t_tilde": nl.t_tilde, "f4_threshold": f4_threshold(nl.rho)}
    try:
        constants.update({f"f5_{k}": v for k, v in f5_constants(nl).items()})
    except ConfigurationError:
        pass

    report = AssumptionReport(
        family=nl.family, constants=constants, checks=checks, flags=flags,
        mesh={"t_min": float(mesh[0]), "t_max": float(mesh[-1]), "size": float(mesh.size)},
    )
    if report.passed:
        logger.info(f"✅ {nl.family}: all assumptions hold on the mesh", extra={'color': True})
    else:
        logger.warning(f"⚠️ {nl.family}: failed {', '.join(report.failed())}", extra={'color': True})
    return report
