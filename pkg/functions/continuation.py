# functions/continuation.py
"""alpha -> 0+ continuation with warm starts and limit diagnostics."""
import logging
import math
import time
from typing import List, Optional, Sequence

import numpy as np

from exceptions import ConfigurationError, NonlinearityRangeError, NumericalError
from functions.certificates import decay_certificate
from functions.energy import EnergyFunctional
from functions.grid import h1_norm, resample
from functions.kernel import build_operator, g_alpha, make_spec
from functions.nonlinearity import F_eval
from functions.solver import mountain_pass
from models.grid import RadialFunction, RadialGrid
from models.kernel import ConvolutionOperator
from models.nonlinearity import Nonlinearity
from models.solver import ContinuationStep, ContinuationTrace
from operator_cache import OperatorStore
from schema.report import CertResult
from schema.run_config import ContinuationSection, SolverSection

logger = logging.getLogger("choquard")

LOG_RESIDUAL_TARGET = 1e-3
DECAY_RATE_FLOOR = 0.45
CAUCHY_WINDOW = 4


def geometric_schedule(alpha0: float, steps: int) -> List[float]:
    """alpha_k = alpha0 2^(-k), k = 0 .. steps - 1"""
    return [alpha0 * 0.5 ** k for k in range(steps)]


def admissible_alpha(omega: float) -> float:
    """Upper end 4(omega - 1)/(3 omega) of the alpha interval used by the uniform decay bound"""
    if not omega > 1.0:
        raise ConfigurationError(f"continuation.omega must exceed 1, got {omega}", {"key": "continuation.omega"})
    return 4.0 * (omega - 1.0) / (3.0 * omega)


def validate_schedule(schedule: Sequence[float]) -> List[float]:
    schedule = [float(a) for a in schedule]
    if not schedule:
        raise ConfigurationError("continuation schedule is empty", {"key": "continuation.steps"})
    if any(not 0.0 < a <= 1.0 for a in schedule):
        raise ConfigurationError("continuation schedule entries must lie in (0, 1]", {"schedule": schedule})
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ConfigurationError("continuation schedule must be strictly decreasing", {"schedule": schedule})
    return schedule


# =================== RESIDUALS ===================

def log_residual(u: RadialFunction, nl: Nonlinearity, op_log: ConvolutionOperator) -> float:
    """
    Residual of -Lap u + u = (ln(1/|x|) * F(u)) f(u) on the grid.

    Same scale as the solver residual: weighted l2 norm of the gradient
    representer over 1 + ||u||.
    """
    if op_log.spec.kind != "log":
        raise ConfigurationError("log_residual needs a log operator", {"kind": op_log.spec.kind})
    return EnergyFunctional(nl, op_log).residual(u.values)


def kernel_swap_gap(u: RadialFunction, nl: Nonlinearity, op_riesz: ConvolutionOperator,
                    op_log: ConvolutionOperator) -> dict:
    """Residuals under G_alpha and under the log kernel, and the kernel-difference bound between them"""
    galpha = EnergyFunctional(nl, op_riesz)
    logk = EnergyFunctional(nl, op_log)
    big_f, small_f, _ = galpha.local(u.values)
    wf = galpha.w * big_f
    diff = (galpha.potential(wf) - logk.potential(wf)) * small_f
    scale = 1.0 + h1_norm(u)
    return {
        "galpha_residual": galpha.residual(u.values),
        "log_residual": logk.residual(u.values),
        "kernel_term": math.sqrt(float(np.dot(galpha.w, diff * diff))) / scale,
    }


# =================== DRIVER ===================

def run_continuation(nl: Nonlinearity, grid: RadialGrid, schedule: Sequence[float],
                     opts: Optional[SolverSection] = None, cont: Optional[ContinuationSection] = None,
                     store: Optional[OperatorStore] = None) -> ContinuationTrace:
    """
    Solve for every alpha in the schedule, warm-starting each step from the previous state.

    A failed solve or a state collapsing to zero truncates the trace and sets
    ``failure``; the states already stored keep their own solve tolerance.
    """
    schedule = validate_schedule(schedule)
    opts = opts or SolverSection()
    cont = cont or ContinuationSection()
    store = store or OperatorStore(workers=opts.workers)
    trace = ContinuationTrace(schedule=schedule)

    op_log = store.get(grid, make_spec("log"))
    previous: Optional[RadialFunction] = None
    logger.info(f"🚀 continuation over {len(schedule)} values of alpha, from {schedule[0]:g} to {schedule[-1]:g}",
                extra={'color': True})

    for k, alpha in enumerate(schedule):
        started = time.perf_counter()
        op = store.get(grid, make_spec("riesz", alpha))
        warm = resample(previous, grid) if previous is not None else None
        try:
            result = mountain_pass(nl, alpha, grid, opts, op=op, warm_start=warm)
        except (NumericalError, NonlinearityRangeError) as exc:
            trace.failure = f"solve failed at alpha={alpha:g}: {exc.detail}"
            logger.error(f"❌ {trace.failure}", extra={'color': True})
            break
        if not result.converged:
            trace.failure = f"solve failed at alpha={alpha:g}: {result.message} (residual {result.residual:.2e})"
            logger.error(f"❌ {trace.failure}", extra={'color': True})
            break

        u = result.u_star
        norm = h1_norm(u)
        if norm < 10.0 * opts.tol:
            trace.failure = f"trivial-limit: ||u|| = {norm:.3e} at alpha={alpha:g}"
            logger.error(f"❌ {trace.failure}", extra={'color': True})
            break

        dh1 = h1_norm(u - previous) if previous is not None else None
        step = ContinuationStep(
            alpha=alpha, result=result, dh1=dh1, log_residual=log_residual(u, nl, op_log),
            energy_log=EnergyFunctional(nl, op_log).value(u.values), norm=norm,
        )
        if alpha <= cont.decay_alpha_max and cont.r_fit < 0.5 * grid.r_max:
            decay = decay_certificate(u, cont.r_fit, nl)
            step.decay_m = decay.details.get("M_fit")
            step.decay_rate = decay.value
            step.decay_passed = decay.passed
        trace.steps.append(step)
        previous = u

        dh1_text = "-" if dh1 is None else f"{dh1:.3e}"
        logger.info(f"🔁 step {k + 1}/{len(schedule)} alpha={alpha:g}: c={result.c_level:.8g} "
                    f"dh1={dh1_text} log_res={step.log_residual:.2e} ({time.perf_counter() - started:.1f}s)")

    trace.completed = not trace.failure and len(trace.steps) == len(schedule)
    logger.info(f"📊 continuation {'completed' if trace.completed else 'stopped'}: {len(trace.steps)} steps, "
                f"{store.builds} operators built, {store.hits} reused")
    return trace


# =================== TRACE VERDICTS ===================

def cauchy_check(trace: ContinuationTrace, burn_in: int = 3) -> CertResult:
    """H^1 increments after burn-in must decrease over the last few steps"""
    increments = trace.h1_increments()
    tail = increments[burn_in:][-CAUCHY_WINDOW:]
    if len(tail) < 2:
        return CertResult(name="cauchy", passed=True, details={"increments": increments,
                                                                "status": "too few steps after burn-in"})
    monotone = all(b <= a for a, b in zip(tail, tail[1:]))
    return CertResult(name="cauchy", passed=monotone, value=tail[-1],
                      details={"increments": increments, "checked": tail, "burn_in": burn_in})


def level_window(trace: ContinuationTrace) -> CertResult:
    """Empirical bounds a <= c_k <= b across the schedule, with b below 1/2"""
    levels = trace.levels()
    if not levels:
        return CertResult(name="level_window", passed=False, details={"status": "empty trace"})
    low, high = min(levels), max(levels)
    return CertResult(name="level_window", passed=bool(low > 0.0 and high < 0.5), value=high,
                      details={"a": low, "b": high, "levels": levels})


def trace_verdicts(trace: ContinuationTrace, cont: Optional[ContinuationSection] = None) -> List[CertResult]:
    cont = cont or ContinuationSection()
    verdicts = [
        CertResult(name="completed", passed=trace.completed, details={"failure": trace.failure}),
        cauchy_check(trace, cont.burn_in),
        level_window(trace),
    ]
    if trace.steps:
        final = trace.steps[-1]
        verdicts.append(CertResult(name="log_residual", passed=bool(final.log_residual <= LOG_RESIDUAL_TARGET),
                                   value=final.log_residual, details={"target": LOG_RESIDUAL_TARGET}))
        rates = [s.decay_rate for s in trace.steps if s.decay_rate is not None]
        if rates:
            verdicts.append(CertResult(name="uniform_decay",
                                       passed=bool(min(rates) >= DECAY_RATE_FLOOR and
                                                   all(s.decay_passed for s in trace.steps
                                                       if s.decay_passed is not None)),
                                       value=min(rates), details={"rates": rates, "floor": DECAY_RATE_FLOOR}))
    return verdicts


# =================== KERNEL TAIL ===================

def tail_kernel_bound_check(alpha: float, omega: float = 1.05, u: Optional[RadialFunction] = None,
                            nl: Optional[Nonlinearity] = None, s_max: float = 40.0) -> CertResult:
    """
    Kernel bounds behind the uniform decay estimate.

    For s >= 1: |G_alpha(s)| <= ln s <= s. For s <= 1: G_alpha(s) s^kappa stays
    bounded, kappa = 4(omega - 1)/(3 omega). With a state u, also reports the
    sup and the tail value of |x|^(-kappa) * F(u).
    """
    kappa = admissible_alpha(omega)
    details = {"alpha": alpha, "omega": omega, "kappa": kappa}
    if not 0.0 < alpha < kappa:
        details["status"] = f"alpha outside the admissible interval (0, {kappa:.6g})"
        return CertResult(name="tail_kernel", passed=False, details=details)

    far = np.linspace(1.0, s_max, 4001)
    g_far = np.abs(g_alpha(far, alpha))
    log_far = np.log(far)
    far_ok = bool(np.all(g_far <= log_far + 1e-14) and np.all(log_far <= far))

    near = np.geomspace(1e-8, 1.0, 4001)
    scaled = g_alpha(near, alpha) * near ** kappa
    c_near = float(np.max(scaled))
    details.update({"far_max_excess": float(np.max(g_far - log_far)), "C_near": c_near,
                    "far_mesh": [1.0, s_max, far.size]})
    passed = far_ok and math.isfinite(c_near)

    if u is not None and nl is not None and kappa >= 1.0:
        details["riesz_potential_status"] = f"not assessable: kappa={kappa:.6g} >= 1 has no finite diagonal average"
    elif u is not None and nl is not None:
        op = build_operator(u.grid, make_spec("riesz", kappa), validate=False)
        potential = op.table @ F_eval(nl, np.maximum(u.values, 0.0))
        tail = u.grid.nodes >= 0.5 * u.grid.r_max
        details["riesz_potential_sup"] = float(np.max(potential))
        details["riesz_potential_tail"] = float(np.max(potential[tail])) if tail.any() else 0.0
        passed = passed and math.isfinite(details["riesz_potential_sup"])

    return CertResult(name="tail_kernel", passed=bool(passed), value=c_near, details=details)
