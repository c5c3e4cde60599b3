# functions/kernel.py
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence, Union

import numpy as np
from scipy import integrate, special

from config import settings
from exceptions import ConfigurationError, GridMismatchError, NumericalError
from models.grid import RadialFunction, RadialGrid
from models.kernel import KERNEL_KINDS, ConvolutionOperator, KernelSpec
from schema.report import CertResult

logger = logging.getLogger("choquard")

ROW_BLOCK = 256


# =================== POINT KERNELS ===================

def _check_alpha(alpha: float, upper_inclusive: bool = True):
    if alpha is None:
        ok = False
    else:
        ok = 0.0 < alpha <= 1.0 if upper_inclusive else 0.0 < alpha < 1.0
    if not ok:
        raise ConfigurationError(f"kernel exponent alpha must lie in (0, 1), got {alpha}", {"key": "kernel.alpha"})


def g_alpha(s, alpha: float):
    """G_alpha(s) = (s^(-alpha) - 1)/alpha, evaluated as expm1(-alpha ln s)/alpha"""
    _check_alpha(alpha)
    arr = np.asarray(s, dtype=np.float64)
    if np.any(arr <= 0.0):
        raise ConfigurationError("G_alpha needs separations s > 0", {"s_min": float(arr.min())})
    out = np.expm1(-alpha * np.log(arr)) / alpha
    return float(out) if out.ndim == 0 else out


def make_spec(kind: str, alpha: Optional[float] = None) -> KernelSpec:
    if kind not in KERNEL_KINDS:
        raise ConfigurationError(f"Unknown kernel kind '{kind}'", {"allowed": list(KERNEL_KINDS)})
    if kind == "log":
        return KernelSpec("log", None)
    # the diagonal angular average diverges at alpha = 1
    _check_alpha(alpha, upper_inclusive=False)
    return KernelSpec(kind, float(alpha))


def hls_sharp_constant(alpha: float) -> float:
    """Sharp constant of the diagonal HLS inequality in the plane, pi^(a/2) G(1-a/2)/G(2-a/2)"""
    _check_alpha(alpha)
    return math.pi ** (alpha / 2.0) * special.gamma(1.0 - alpha / 2.0) / special.gamma(2.0 - alpha / 2.0)


# =================== ANGULAR AVERAGES ===================

def riesz_average_closed(r, s, alpha: float):
    """Angular average of |x|^(-alpha) between circles of radii r and s.

    For r < s this is s^(-alpha) 2F1(alpha/2, alpha/2; 1; (r/s)^2); the origin
    and the diagonal are the limits of the same formula.
    """
    r = np.asarray(r, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    lo = np.minimum(r, s)
    hi = np.maximum(r, s)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(hi > 0, (lo / np.where(hi > 0, hi, 1.0)) ** 2, 0.0)
        out = hi ** -alpha * special.hyp2f1(alpha / 2.0, alpha / 2.0, 1.0, z)
    return out


def riesz_average_quad(r: float, s: float, alpha: float, epsabs: float = 1e-13, epsrel: float = 1e-12) -> float:
    """Angular average of |x|^(-alpha) by adaptive quadrature on [0, pi].

    When the circles nearly touch, the peak at theta = 0 is split off; on the
    diagonal the theta^(-alpha) singularity is handled by an algebraic weight.
    """
    if r == 0.0 or s == 0.0:
        hi = max(r, s)
        if hi == 0.0:
            raise NumericalError("Riesz average undefined for r = s = 0")
        return hi ** -alpha

    hi = max(r, s)

    def integrand(theta):
        return (r * r + s * s - 2.0 * r * s * math.cos(theta)) ** (-alpha / 2.0)

    total = 0.0
    err_total = 0.0
    if r == s:
        cut = min(math.pi, 0.5)

        def regular(theta):
            if theta == 0.0:
                return r ** -alpha
            return (2.0 * r * math.sin(theta / 2.0) / theta) ** -alpha

        val, err = integrate.quad(regular, 0.0, cut, weight="alg", wvar=(-alpha, 0.0),
                                  epsabs=epsabs, epsrel=epsrel, limit=200)
        total += val
        err_total += err
        val, err = integrate.quad(integrand, cut, math.pi, epsabs=epsabs, epsrel=epsrel, limit=200)
        total += val
        err_total += err
    elif abs(r - s) < 0.05 * hi:
        width = abs(r - s) / hi
        breaks = [0.0]
        for b in (width, 4.0 * width, 16.0 * width, 0.5):
            if breaks[-1] < b < math.pi:
                breaks.append(b)
        breaks.append(math.pi)
        for a, b in zip(breaks[:-1], breaks[1:]):
            val, err = integrate.quad(integrand, a, b, epsabs=epsabs, epsrel=epsrel, limit=200)
            total += val
            err_total += err
    else:
        total, err_total = integrate.quad(integrand, 0.0, math.pi, epsabs=epsabs, epsrel=epsrel, limit=200)

    if not math.isfinite(total) or err_total > 1e-9 * max(abs(total), 1.0):
        raise NumericalError(
            "Angular quadrature did not converge",
            {"r": r, "s": s, "alpha": alpha, "estimate": total, "error": err_total},
        )
    return total / math.pi


def angular_avg(kind: str, r: float, s: float, alpha: Optional[float] = None, method: str = "closed") -> float:
    """
    (1/2pi) times the integral over a full turn of K(sqrt(r^2 + s^2 - 2 r s cos theta)).

    Args:
        kind: 'log' for ln(1/|x|), 'riesz' for |x|^(-alpha), 'riesz_minus_one' for G_alpha
        r, s: Radii >= 0, not both 0
        alpha: Exponent for the Riesz kinds
        method: 'closed' (hypergeometric form) or 'quad' (adaptive quadrature)

    Returns:
        float: the angular average
    """
    if r < 0 or s < 0:
        raise ConfigurationError("angular_avg needs r, s >= 0", {"r": r, "s": s})
    if r == 0 and s == 0:
        raise NumericalError("Kernel average is singular at r = s = 0", {"kind": kind})
    spec = make_spec(kind, alpha)
    if spec.kind == "log":
        return -math.log(max(r, s))
    if method == "quad":
        riesz = riesz_average_quad(float(r), float(s), spec.alpha)
    else:
        riesz = float(riesz_average_closed(r, s, spec.alpha))
    if spec.kind == "riesz":
        return riesz
    return (riesz - 1.0) / spec.alpha


def validate_closed_form(alpha: float, radii: Sequence[float], tolerance: float = 1e-8) -> float:
    """Largest relative gap between the hypergeometric and quadrature averages on radii pairs"""
    radii = [float(x) for x in radii if x > 0]
    worst = 0.0
    witness = None
    for i, r in enumerate(radii):
        for s in radii[i:]:
            closed = float(riesz_average_closed(r, s, alpha))
            quad = riesz_average_quad(r, s, alpha)
            gap = abs(closed - quad) / max(abs(quad), 1e-300)
            if gap > worst:
                worst, witness = gap, (r, s)
    if worst > tolerance:
        raise NumericalError(
            "Closed-form Riesz average disagrees with quadrature",
            {"alpha": alpha, "gap": worst, "pair": witness, "tolerance": tolerance},
        )
    return worst


# =================== OPERATORS ===================

def _validation_radii(grid: RadialGrid) -> list:
    r = grid.nodes
    picks = np.unique(np.linspace(1, grid.n - 1, 6).astype(int))
    radii = list(r[picks])
    # near-diagonal pair inside the refined core
    mid = min(grid.n - 2, max(1, grid.n // 8))
    radii += [r[mid], r[mid + 1]]
    return radii


def _riesz_block(r: np.ndarray, rows: slice, alpha: float) -> np.ndarray:
    block = riesz_average_closed(r[rows, None], r[None, :], alpha)
    if rows.start == 0:
        # removable origin: mean of |y|^(-alpha) over the disk of radius r_1
        block[0, 0] = 2.0 * r[1] ** -alpha / (2.0 - alpha)
    return block


def _log_block(r: np.ndarray, rows: slice) -> np.ndarray:
    with np.errstate(divide="ignore"):
        block = -np.log(np.maximum(r[rows, None], r[None, :]))
    if rows.start == 0:
        # mean of ln(1/|y|) over the disk of radius r_1
        block[0, 0] = -math.log(r[1]) + 0.5
    return block


def build_operator(grid: RadialGrid, spec: KernelSpec, workers: Optional[int] = None,
                   tolerance: float = 1e-8, validate: bool = True) -> ConvolutionOperator:
    """
    Assemble the dense radial convolution table T_ij = angular_avg(r_i, r_j) w_j.

    Rows are filled in blocks on a thread pool; every entry is computed
    independently, so the result does not depend on the worker count.
    """
    if grid.n > settings.MAX_OPERATOR_N:
        raise ConfigurationError(
            f"Dense operator for N={grid.n} exceeds the bound N <= {settings.MAX_OPERATOR_N}",
            {"key": "grid.n", "bytes": 16 * grid.n * grid.n},
        )
    workers = workers or settings.DEFAULT_WORKERS
    started = time.perf_counter()
    r = grid.nodes
    gap = 0.0

    if spec.kind != "log" and validate:
        gap = validate_closed_form(spec.alpha, _validation_radii(grid), tolerance)

    def fill(rows: slice) -> np.ndarray:
        if spec.kind == "log":
            return _log_block(r, rows)
        return _riesz_block(r, rows, spec.alpha)

    blocks = [slice(a, min(a + ROW_BLOCK, grid.n)) for a in range(0, grid.n, ROW_BLOCK)]
    averages = np.empty((grid.n, grid.n))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for rows, block in zip(blocks, pool.map(fill, blocks)):
            averages[rows] = block

    if spec.kind == "riesz_minus_one":
        averages = (averages - 1.0) / spec.alpha

    # exact symmetry regardless of special-function rounding
    averages = 0.5 * (averages + averages.T)
    if not np.all(np.isfinite(averages)):
        raise NumericalError("Kernel table has non-finite entries", {"kernel": spec.label()})

    logger.info(
        f"📊 built {spec.label()} operator N={grid.n} in {time.perf_counter() - started:.2f}s "
        f"(closed-form gap {gap:.1e})"
    )
    return ConvolutionOperator(grid=grid, spec=spec, averages=averages, tolerance=tolerance, validation_error=gap)


def galpha_operator(riesz_op: ConvolutionOperator) -> ConvolutionOperator:
    """G_alpha operator from a Riesz operator: (T_riesz - ones w^T)/alpha"""
    if riesz_op.spec.kind != "riesz":
        raise ConfigurationError("galpha_operator needs a riesz operator", {"kind": riesz_op.spec.kind})
    alpha = riesz_op.spec.alpha
    return ConvolutionOperator(
        grid=riesz_op.grid, spec=KernelSpec("riesz_minus_one", alpha),
        averages=(riesz_op.averages - 1.0) / alpha,
        tolerance=riesz_op.tolerance, validation_error=riesz_op.validation_error,
    )


def apply(op: ConvolutionOperator, g: Union[RadialFunction, np.ndarray]) -> np.ndarray:
    """(K * g)(r_i) for all nodes"""
    if isinstance(g, RadialFunction):
        if g.grid is not op.grid and g.grid.hash != op.grid.hash:
            raise GridMismatchError("Operand and operator use different grids",
                                    {"operator": op.grid.hash, "operand": g.grid.hash})
        values = g.values
    else:
        values = np.asarray(g, dtype=np.float64)
        if values.shape != (op.n,):
            raise GridMismatchError("Operand length does not match the operator",
                                    {"operator": op.n, "operand": int(values.size)})
    return op.table @ values


def bilinear(op: ConvolutionOperator, g: np.ndarray, h: np.ndarray) -> float:
    """Discrete double integral of g(x) K(x - y) h(y)"""
    wg = op.grid.weights * np.asarray(g)
    wh = op.grid.weights * np.asarray(h)
    return float(wh @ (op.averages @ wg))


# =================== CERTIFICATES ===================

def lemma_G_bounds(alpha: float, beta: float, s_mesh: Optional[np.ndarray] = None) -> CertResult:
    """Finite sup of G_alpha(s) s^beta for beta > alpha, and G_alpha(s) >= ln(1/s) on (0, 1]"""
    _check_alpha(alpha)
    if not beta > alpha:
        raise ConfigurationError(f"beta must exceed alpha, got beta={beta}, alpha={alpha}", {"beta": beta})
    s = np.geomspace(1e-6, 10.0, 4001) if s_mesh is None else np.asarray(s_mesh, dtype=np.float64)
    g = g_alpha(s, alpha)
    scaled = g * s ** beta
    idx = int(np.argmax(scaled))
    unit = s <= 1.0
    violation = float(np.max(-np.log(s[unit]) - g[unit])) if unit.any() else 0.0
    violation = max(violation, 0.0)
    passed = bool(np.isfinite(scaled[idx]) and violation <= 1e-12)
    return CertResult(
        name="kernel_bounds", passed=passed, value=float(scaled[idx]),
        details={"alpha": alpha, "beta": beta, "C_beta": float(scaled[idx]), "witness_s": float(s[idx]),
                 "lower_bound_violation": violation, "mesh": [float(s[0]), float(s[-1]), int(s.size)]},
    )


def kernel_limit_gap(alpha: float, s_mesh: Optional[np.ndarray] = None) -> float:
    """sup over the mesh of |G_alpha(s) + ln s|"""
    s = np.linspace(0.05, 20.0, 2000) if s_mesh is None else np.asarray(s_mesh)
    return float(np.max(np.abs(g_alpha(s, alpha) + np.log(s))))


def kernel_table(alpha: float, r_mesh: np.ndarray, s_mesh: np.ndarray) -> dict:
    """Riesz, G_alpha and log angular averages on an (r, s) mesh"""
    _check_alpha(alpha)
    rr, ss = np.meshgrid(np.asarray(r_mesh, float), np.asarray(s_mesh, float), indexing="ij")
    riesz = riesz_average_closed(rr, ss, alpha)
    with np.errstate(divide="ignore"):
        log = -np.log(np.maximum(rr, ss))
    return {"r": rr.ravel(), "s": ss.ravel(), "riesz": riesz.ravel(),
            "galpha": ((riesz - 1.0) / alpha).ravel(), "log": log.ravel()}
