# functions/solver.py
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from exceptions import NonlinearityRangeError, NumericalError
from functions.energy import EnergyFunctional
from functions.grid import h1_norm, stiffness_banded
from functions.kernel import build_operator, make_spec
from functions.nonlinearity import H_transform, quotient_Q, f_eval
from models.grid import RadialFunction, RadialGrid
from models.kernel import ConvolutionOperator
from models.nonlinearity import Nonlinearity
from models.solver import IterationRecord, MountainPassResult
from schema.report import CheckEntry, DiagReport
from schema.run_config import SolverSection

logger = logging.getLogger("choquard")

ARMIJO_C = 1e-4
BACKTRACK = 0.5
MIN_STEP = 1e-14
TRIVIAL_NORM = 1e-6


def _operator(grid: RadialGrid, alpha: float, op: Optional[ConvolutionOperator],
              workers: Optional[int]) -> ConvolutionOperator:
    if op is not None:
        return op
    return build_operator(grid, make_spec("riesz", alpha), workers=workers)


class SobolevMetric:
    """H^1 inner product (K + W) and its banded Cholesky solves"""

    def __init__(self, grid: RadialGrid):
        self.grid = grid
        self.banded = stiffness_banded(grid)
        self.factor = linalg.cholesky_banded(self.banded)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return linalg.cho_solve_banded((self.factor, False), rhs)

    def norm(self, v: np.ndarray) -> float:
        return h1_norm(RadialFunction(self.grid, v))


# =================== ENDPOINT ===================

def bump_profile(grid: RadialGrid) -> RadialFunction:
    """C^1 bump: 1 on r <= 1/8, 0 on r >= 1/4, cubic smoothstep between"""
    r = grid.nodes
    s = np.clip((r - 0.125) / 0.125, 0.0, 1.0)
    return RadialFunction(grid, 1.0 - s * s * (3.0 - 2.0 * s))


def find_endpoint(nl: Nonlinearity, alpha: float, grid: RadialGrid,
                  op: Optional[ConvolutionOperator] = None,
                  workers: Optional[int] = None) -> Tuple[RadialFunction, float]:
    """
    Scale of the bump with negative energy: doubling scan, then bisection on the sign.

    Returns:
        (e, t0): e = t0 * bump with I_alpha(e) < 0
    """
    functional = EnergyFunctional(nl, _operator(grid, alpha, op, workers), alpha)
    e0 = bump_profile(grid)
    cap = nl.effective_max * (1.0 - 1e-9) / float(e0.values.max())

    def level(t: float) -> float:
        return functional.value(t * e0.values)

    lower, upper = 0.0, 0.25
    while level(upper) >= 0.0:
        lower = upper
        if upper >= cap:
            raise NonlinearityRangeError(
                f"no negative level reachable in machine range for {nl.family} (t up to {cap:.4g})",
                cap, diagnostics={"alpha": alpha},
            )
        upper = min(2.0 * upper, cap)

    for _ in range(60):
        mid = 0.5 * (lower + upper)
        if level(mid) < 0.0:
            upper = mid
        else:
            lower = mid
        if upper - lower <= 1e-10 * upper:
            break

    t0 = upper
    pushed = min(1.2 * upper, cap)
    try:
        if level(pushed) < level(upper):
            t0 = pushed
    except (NonlinearityRangeError, NumericalError):
        pass

    logger.info(f"✅ endpoint t0={t0:.6g} with I={level(t0):.6g} (alpha={alpha:g})")
    return e0 * t0, t0


# =================== PATH PHASE ===================

def _levels(functional: EnergyFunctional, path: np.ndarray, pool: ThreadPoolExecutor) -> np.ndarray:
    return np.fromiter(pool.map(functional.value, list(path)), dtype=np.float64, count=path.shape[0])


def _reparametrize(path: np.ndarray, metric: SobolevMetric) -> np.ndarray:
    """Redistribute interior states at equal H^1 arclength along the polygon"""
    seg = np.array([metric.norm(b - a) for a, b in zip(path[:-1], path[1:])])
    arc = np.concatenate(([0.0], np.cumsum(seg)))
    if arc[-1] <= 0.0:
        return path
    targets = np.linspace(0.0, arc[-1], path.shape[0])
    out = np.empty_like(path)
    out[0], out[-1] = path[0], path[-1]
    for k in range(1, path.shape[0] - 1):
        j = min(int(np.searchsorted(arc, targets[k], side="right")) - 1, path.shape[0] - 2)
        frac = (targets[k] - arc[j]) / seg[j] if seg[j] > 0 else 0.0
        out[k] = (1.0 - frac) * path[j] + frac * path[j + 1]
    return out


def mountain_pass(nl: Nonlinearity, alpha: float, grid: RadialGrid, opts: Optional[SolverSection] = None,
                  op: Optional[ConvolutionOperator] = None, warm_start: Optional[RadialFunction] = None,
                  endpoint: Optional[RadialFunction] = None) -> MountainPassResult:
    """
    Mountain-pass critical point of the approximate energy.

    A polygonal path from 0 to a negative-energy endpoint is deformed by moving
    its highest state along the Sobolev gradient until the highest state is
    nearly critical; damped Newton then refines it. A warm start goes straight
    to Newton and falls back to the path when it fails.
    """
    opts = opts or SolverSection()
    op = _operator(grid, alpha, op, opts.workers)
    functional = EnergyFunctional(nl, op, alpha)
    metric = SobolevMetric(grid)

    if warm_start is not None and opts.newton:
        try:
            u_w, res_w, its_w = refine_newton(warm_start, nl, alpha, opts, op=op, metric=metric)
            if res_w <= opts.tol and metric.norm(u_w.values) > TRIVIAL_NORM:
                logger.info(f"✅ warm start converged in {its_w} Newton steps (alpha={alpha:g})")
                return _result(functional, u_w, res_w, alpha, 0, its_w, [], [], 0.0, True, "warm start")
            logger.warning(f"⚠️ warm start failed (residual {res_w:.2e}), running the path phase")
        except (NumericalError, NonlinearityRangeError) as exc:
            logger.warning(f"⚠️ warm start failed: {exc.detail}")

    if endpoint is None:
        endpoint, t0 = find_endpoint(nl, alpha, grid, op=op, workers=opts.workers)
        endpoint = endpoint * opts.endpoint_scale
        endpoint_t = t0 * opts.endpoint_scale
    else:
        endpoint_t = float(endpoint.values.max())
    m = opts.path_nodes
    path = np.linspace(0.0, 1.0, m + 1)[:, None] * endpoint.values[None, :]

    history = []
    path_levels = []
    step = 1.0
    converged_path = False
    message = ""
    iteration = 0

    with ThreadPoolExecutor(max_workers=opts.workers) as pool:
        levels = _levels(functional, path, pool)
        logger.info(f"🚀 mountain pass: alpha={alpha:g}, m={m}, start max level {levels.max():.6g}",
                    extra={'color': True})
        for iteration in range(1, opts.max_iter + 1):
            k = int(np.argmax(levels))
            u = path[k]
            grad = functional.gradient(u)
            direction = metric.solve(grad)
            slope = float(grad @ direction)
            residual = functional.residual(u)
            path_levels.append(float(levels[k]))

            if residual <= opts.tol_path:
                converged_path = True
                history.append(IterationRecord(iteration, float(levels[k]), residual, 0.0))
                break
            if k == 0 or k == m:
                message = "path maximum sits at an endpoint"
                break

            # ✅ Armijo backtracking along the Sobolev gradient
            step = min(1.0, 2.0 * step)
            accepted = False
            while step >= MIN_STEP:
                candidate = u - step * direction
                try:
                    new_level = functional.value(candidate)
                except (NonlinearityRangeError, NumericalError):
                    new_level = math.inf
                if new_level <= levels[k] - ARMIJO_C * step * slope:
                    accepted = True
                    break
                step *= BACKTRACK
            if not accepted:
                message = "line search failed"
                logger.warning(f"⚠️ line search failed at iteration {iteration}")
                break

            path[k] = candidate
            levels[k] = new_level
            history.append(IterationRecord(iteration, float(levels.max()), residual, step))
            logger.debug(f"🔁 iter {iteration}: node {k} level {new_level:.10g} residual {residual:.3e} step {step:.2e}")

            if iteration % opts.reparam_every == 0:
                trial = _reparametrize(path, metric)
                try:
                    trial_levels = _levels(functional, trial, pool)
                except (NonlinearityRangeError, NumericalError):
                    trial_levels = None
                if trial_levels is not None and trial_levels.max() <= levels.max() + 1e-12:
                    path, levels = trial, trial_levels

    k = int(np.argmax(levels))
    u0 = RadialFunction(grid, path[k])
    if not converged_path and not message:
        message = "path phase hit the iteration cap"

    newton_its = 0
    u_star, residual = u0, functional.residual(u0.values)
    if opts.newton:
        try:
            u_n, res_n, newton_its = refine_newton(u0, nl, alpha, opts, op=op, metric=metric)
            if metric.norm(u_n.values) > TRIVIAL_NORM:
                u_star, residual = u_n, res_n
            else:
                message = "Newton collapsed to the trivial critical point"
        except (NumericalError, NonlinearityRangeError) as exc:
            message = f"Newton failed: {exc.detail}"

    converged = residual <= opts.tol
    if converged:
        message = message if converged_path else (message + "; refined by Newton").lstrip("; ")
        logger.info(f"✅ critical point: c={functional.value(u_star.values):.10g}, residual={residual:.2e}",
                    extra={'color': True})
    else:
        logger.warning(f"⚠️ no critical point within tolerance: residual {residual:.2e} ({message})",
                       extra={'color': True})
    return _result(functional, u_star, residual, alpha, iteration, newton_its, path_levels, history,
                   endpoint_t, converged, message)


def _result(functional: EnergyFunctional, u: RadialFunction, residual: float, alpha: float, iterations: int,
            newton_its: int, path_levels, history, scale: float, converged: bool, message: str) -> MountainPassResult:
    values = u.values
    top = float(values.max())
    positive = bool(values.min() >= -1e-10 * max(top, 0.0)) and top > 0.0
    breakdown = functional.breakdown(values)
    return MountainPassResult(
        u_star=u, c_level=breakdown.total, residual=residual, alpha=alpha, iterations=iterations,
        positivity_flag=positive, energy=breakdown, converged=converged, path_levels=list(path_levels),
        newton_iterations=newton_its, history=list(history), endpoint_scale=scale, message=message,
    )


# =================== NEWTON ===================

def check_jacobian(functional: EnergyFunctional, u: np.ndarray, jac: np.ndarray,
                   columns: Optional[np.ndarray] = None, tolerance: float = 1e-5) -> float:
    """Largest relative gap between spot Jacobian columns and central differences of the gradient"""
    n = u.size
    if columns is None:
        columns = np.unique(np.array([n // 16, n // 4, n // 2, (3 * n) // 4]))
    worst = 0.0
    for j in columns:
        h = 1e-6 * max(1.0, abs(u[j]))
        bump = np.zeros(n)
        bump[j] = h
        fd = (functional.gradient(u + bump) - functional.gradient(u - bump)) / (2.0 * h)
        gap = float(np.linalg.norm(fd - jac[:, j]) / max(np.linalg.norm(jac[:, j]), 1e-300))
        worst = max(worst, gap)
    if worst > tolerance:
        raise NumericalError("Jacobian disagrees with finite differences", {"gap": worst, "tolerance": tolerance})
    return worst


def refine_newton(u0: RadialFunction, nl: Nonlinearity, alpha: float, opts: Optional[SolverSection] = None,
                  op: Optional[ConvolutionOperator] = None,
                  metric: Optional[SobolevMetric] = None) -> Tuple[RadialFunction, float, int]:
    """
    Damped Newton on the discrete gradient.

    The merit is 1/2 e^T (K + W)^(-1) e for the Euclidean gradient e; a
    singular Jacobian switches to gradient flow on the same merit.

    Returns:
        (u_star, residual, iterations)
    """
    opts = opts or SolverSection()
    grid = u0.grid
    op = _operator(grid, alpha, op, opts.workers)
    functional = EnergyFunctional(nl, op, alpha)
    metric = metric or SobolevMetric(grid)

    u = u0.values.copy()
    residual = functional.residual(u)
    if residual <= opts.tol:
        return RadialFunction(grid, u), residual, 0

    def merit(v: np.ndarray) -> float:
        e = functional.gradient(v)
        return 0.5 * float(e @ metric.solve(e))

    checked = False
    iterations = 0
    for iterations in range(1, opts.newton_max_iter + 1):
        grad = functional.gradient(u)
        jac = functional.hessian(u)
        if not checked:
            check_jacobian(functional, u, jac)
            checked = True
        current = 0.5 * float(grad @ metric.solve(grad))
        try:
            delta = linalg.solve(jac, -grad, assume_a="sym")
            if not np.all(np.isfinite(delta)):
                raise linalg.LinAlgError("non-finite Newton step")
        except (linalg.LinAlgError, ValueError):
            logger.warning("⚠️ singular Jacobian, switching to gradient flow on the residual merit")
            u = _gradient_flow(functional, metric, u, jac, merit, opts)
            residual = functional.residual(u)
            return RadialFunction(grid, u), residual, iterations

        step = 1.0
        while step >= 1e-10:
            trial = u + step * delta
            try:
                trial_merit = merit(trial)
            except (NonlinearityRangeError, NumericalError):
                trial_merit = math.inf
            if trial_merit <= (1.0 - 2.0 * ARMIJO_C * step) * current:
                break
            step *= BACKTRACK
        else:
            raise NumericalError("Newton line search failed", {"iteration": iterations, "residual": residual})

        u = trial
        residual = functional.residual(u)
        logger.debug(f"🔁 Newton {iterations}: residual {residual:.3e} step {step:g}")
        if residual <= opts.tol:
            break

    return RadialFunction(grid, u), residual, iterations


def _gradient_flow(functional: EnergyFunctional, metric: SobolevMetric, u: np.ndarray, jac: np.ndarray,
                   merit, opts: SolverSection, max_steps: int = 500) -> np.ndarray:
    step = 1.0
    for _ in range(max_steps):
        grad = functional.gradient(u)
        # gradient of the merit is J P^-1 e, preconditioned once more by P
        direction = metric.solve(jac @ metric.solve(grad))
        current = 0.5 * float(grad @ metric.solve(grad))
        slope = float((jac @ metric.solve(grad)) @ direction)
        step = min(1.0, 2.0 * step)
        while step >= MIN_STEP:
            trial = u - step * direction
            try:
                if merit(trial) <= current - ARMIJO_C * step * slope:
                    break
            except (NonlinearityRangeError, NumericalError):
                pass
            step *= BACKTRACK
        else:
            break
        u = trial
        if functional.residual(u) <= opts.tol:
            break
        jac = functional.hessian(u)
    return u


# =================== DIAGNOSTICS ===================

def cerami_diagnostics(u_star: RadialFunction, nl: Nonlinearity, alpha: float,
                       op: Optional[ConvolutionOperator] = None, level: Optional[float] = None,
                       slack: float = 1e-6, workers: Optional[int] = None) -> DiagReport:
    """
    Bounds on a critical point that a bounded Cerami sequence satisfies in the limit.

    Checks tau ||u||^2 <= 2c + slack, ||H(u)||^2 <= 2c + slack and
    |F(u)/f(u)| <= (1 - tau)|u| pointwise; also reports the Nehari gap
    ||u||^2 - integral of (G * F) f(u) u, the integral of f(u) u and the
    pairing I'(u) Q(u).
    """
    grid = u_star.grid
    op = _operator(grid, alpha, op, workers)
    functional = EnergyFunctional(nl, op, alpha)
    u = u_star.values
    c = functional.value(u) if level is None else float(level)

    norm_sq = h1_norm(u_star) ** 2
    h_vals = H_transform(nl, np.maximum(u, 0.0))
    h_norm_sq = h1_norm(RadialFunction(grid, h_vals)) ** 2
    q_excess = np.abs(quotient_Q(nl, u)) - (1.0 - nl.tau) * np.abs(u)
    worst = int(np.argmax(q_excess))

    big_f, small_f, _ = functional.local(u)
    pot = functional.potential(functional.w * big_f)
    nonlocal_pairing = float(np.dot(functional.w * small_f * pot, u))
    fu_u = float(np.dot(functional.w, f_eval(nl, np.maximum(u, 0.0)) * u))
    # I'(u) Q(u) vanishes at a critical point
    q_pairing = float(np.dot(functional.gradient(u), quotient_Q(nl, u)))

    checks = [
        CheckEntry(name="tau_norm_bound", passed=bool(nl.tau * norm_sq <= 2.0 * c + slack),
                   value=nl.tau * norm_sq, bound=2.0 * c + slack, note="tau ||u||^2 <= 2c"),
        CheckEntry(name="h_norm_bound", passed=bool(h_norm_sq <= 2.0 * c + slack),
                   value=h_norm_sq, bound=2.0 * c + slack, note="||H(u)||^2 <= 2c"),
        CheckEntry(name="quotient_bound", passed=bool(q_excess[worst] <= 1e-12 * max(1.0, abs(u[worst]))),
                   value=float(q_excess[worst]), bound=0.0, witness_t=float(u[worst]),
                   note="|F(u)/f(u)| <= (1 - tau)|u|"),
    ]
    values = {
        "level": c,
        "norm_sq": norm_sq,
        "h_norm_sq": h_norm_sq,
        "nehari_gap": (norm_sq - nonlocal_pairing) / max(1.0, norm_sq),
        "fu_u_integral": fu_u,
        "q_test_pairing": q_pairing / max(1.0, norm_sq),
        "energy_lower_bound_gap": 2.0 * c - nl.tau * norm_sq,
    }
    report = DiagReport(level=c, tau=nl.tau, norm_sq=norm_sq, h_norm_sq=h_norm_sq, checks=checks, values=values)
    if not report.passed:
        failed = [ch.name for ch in checks if not ch.passed]
        logger.warning(f"⚠️ Cerami diagnostics violated: {', '.join(failed)}")
    return report
