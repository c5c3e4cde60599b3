# functions/energy.py
"""Discrete energies, their gradients and Hessians on a radial grid.

With P1 stiffness K, lumped area weights W = diag(w) and the convolution
average matrix A of the operator, the approximate energy of samples u reads

    I(u) = 1/2 u^T (K + W) u - 1/2 (w F)^T G (w F),    F = F(max(u, 0))

where G = (A - 1)/alpha for a Riesz operator, G = A for a G_alpha or log operator.
The Euclidean gradient is (K + W) u - W f (G w F); dividing by w gives the
representer of the derivative in the weighted inner product.
"""
import logging
import math
from typing import Optional

import numpy as np

from exceptions import ConfigurationError, NonlinearityRangeError, NumericalError
from functions.grid import apply_stiffness, ensure_same_grid, h1_norm, stiffness_dense
from functions.nonlinearity import F_eval, evaluate_all
from models.energy import EnergyBreakdown
from models.grid import RadialFunction
from models.kernel import ConvolutionOperator
from models.nonlinearity import Nonlinearity
from schema.report import CertResult

logger = logging.getLogger("choquard")


class EnergyFunctional:
    """Energy, gradient and Hessian of one nonlinearity paired with one convolution operator"""

    def __init__(self, nl: Nonlinearity, op: ConvolutionOperator, alpha: Optional[float] = None):
        kind = op.spec.kind
        if kind == "riesz":
            if alpha is None:
                alpha = op.spec.alpha
            if not math.isclose(alpha, op.spec.alpha, rel_tol=1e-12):
                raise ConfigurationError(
                    f"alpha={alpha} does not match the operator's alpha={op.spec.alpha}", {"key": "kernel.alpha"}
                )
        elif kind == "riesz_minus_one":
            alpha = op.spec.alpha
        else:
            alpha = None
        self.nl = nl
        self.op = op
        self.alpha = alpha
        self.kind = kind
        self.grid = op.grid
        self.w = op.grid.weights

    # ✅ local terms
    def local(self, u: np.ndarray):
        pos = np.maximum(u, 0.0)
        try:
            return evaluate_all(self.nl, pos)
        except NonlinearityRangeError as exc:
            idx = int(np.argmax(pos))
            raise NonlinearityRangeError(
                exc.detail, float(pos[idx]), location=float(self.grid.nodes[idx]),
                diagnostics=exc.diagnostics,
            ) from exc

    def potential(self, w_big_f: np.ndarray) -> np.ndarray:
        """(G * F)(r_i) from the weighted samples w F"""
        conv = self.op.averages @ w_big_f
        if self.kind == "riesz":
            return (conv - w_big_f.sum()) / self.alpha
        return conv

    def kernel_matrix(self) -> np.ndarray:
        if self.kind == "riesz":
            return (self.op.averages - 1.0) / self.alpha
        return self.op.averages

    # ✅ energy
    def quadratic(self, u: np.ndarray) -> float:
        return 0.5 * float(np.dot(u, apply_stiffness(u, self.grid)))

    def breakdown(self, u: np.ndarray) -> EnergyBreakdown:
        big_f, _, _ = self.local(u)
        wf = self.w * big_f
        quad = self.quadratic(u)
        if self.kind == "riesz":
            conv = self.op.averages @ wf
            mass_sum = float(wf.sum())
            riesz = 0.5 * float(wf @ conv) / self.alpha
            mass = 0.5 * mass_sum * mass_sum / self.alpha
            galpha = 0.5 * float(wf @ ((conv - mass_sum) / self.alpha))
        else:
            galpha = 0.5 * float(wf @ self.potential(wf))
            mass = math.nan
            riesz = math.nan
            if self.kind == "riesz_minus_one":
                mass_sum = float(wf.sum())
                mass = 0.5 * mass_sum * mass_sum / self.alpha
                riesz = galpha + mass
        total = quad - galpha
        if not math.isfinite(total):
            raise NumericalError("Energy is not finite", {"quadratic": quad, "nonlocal": galpha})
        return EnergyBreakdown(quadratic=quad, mass=mass, riesz=riesz, galpha=galpha, total=total)

    def value(self, u: np.ndarray) -> float:
        big_f, _, _ = self.local(u)
        wf = self.w * big_f
        total = self.quadratic(u) - 0.5 * float(wf @ self.potential(wf))
        if not math.isfinite(total):
            raise NumericalError("Energy is not finite", {"max_u": float(np.max(u))})
        return total

    # ✅ derivatives
    def gradient(self, u: np.ndarray) -> np.ndarray:
        """Euclidean gradient: d I / d u_i"""
        big_f, small_f, _ = self.local(u)
        pot = self.potential(self.w * big_f)
        return apply_stiffness(u, self.grid) - self.w * small_f * pot

    def representer(self, u: np.ndarray) -> np.ndarray:
        """g with sum(g v w) = I'(u) v for every grid function v"""
        return self.gradient(u) / self.w

    def residual(self, u: np.ndarray) -> float:
        grad = self.gradient(u)
        weighted = math.sqrt(float(np.dot(grad, grad / self.w)))
        return weighted / (1.0 + h1_norm(RadialFunction(self.grid, u)))

    def hessian(self, u: np.ndarray) -> np.ndarray:
        """Dense Jacobian of the Euclidean gradient"""
        big_f, small_f, f_prime = self.local(u)
        pot = self.potential(self.w * big_f)
        wf = self.w * small_f
        jac = stiffness_dense(self.grid)
        jac -= wf[:, None] * self.kernel_matrix() * wf[None, :]
        jac[np.diag_indices_from(jac)] -= self.w * f_prime * pot
        return jac


# =================== MODULE OPERATIONS ===================

def energy_alpha(u: RadialFunction, nl: Nonlinearity, op_riesz: ConvolutionOperator, alpha: float) -> EnergyBreakdown:
    """Approximate energy with its split into quadratic, mass, Riesz and G_alpha parts"""
    ensure_same_grid(u, grid=op_riesz.grid)
    return EnergyFunctional(nl, op_riesz, alpha).breakdown(u.values)


def energy_log(u: RadialFunction, nl: Nonlinearity, op_log: ConvolutionOperator) -> float:
    """Energy with the logarithmic kernel, 1/2 ||u||^2 + 1/2 double integral of ln|x - y| F F"""
    if op_log.spec.kind != "log":
        raise ConfigurationError("energy_log needs a log operator", {"kind": op_log.spec.kind})
    ensure_same_grid(u, grid=op_log.grid)
    return EnergyFunctional(nl, op_log).value(u.values)


def log_term(u: RadialFunction, nl: Nonlinearity, op_log: ConvolutionOperator) -> float:
    """1/2 double integral of ln(1/|x - y|) F(u(x)) F(u(y))"""
    functional = EnergyFunctional(nl, op_log)
    big_f, _, _ = functional.local(u.values)
    wf = functional.w * big_f
    return 0.5 * float(wf @ functional.potential(wf))


def gradient_alpha(u: RadialFunction, nl: Nonlinearity, op_riesz: ConvolutionOperator, alpha: float) -> RadialFunction:
    ensure_same_grid(u, grid=op_riesz.grid)
    return RadialFunction(u.grid, EnergyFunctional(nl, op_riesz, alpha).representer(u.values))


def residual_norm(u: RadialFunction, nl: Nonlinearity, op: ConvolutionOperator, alpha: Optional[float] = None) -> float:
    """Weighted l2 norm of the gradient representer divided by 1 + ||u||"""
    ensure_same_grid(u, grid=op.grid)
    return EnergyFunctional(nl, op, alpha).residual(u.values)


# =================== GEOMETRY CHECKS ===================

def mountain_pass_ring(nl: Nonlinearity, op_riesz: ConvolutionOperator, alpha: float, radius: float,
                       samples: int = 64, seed: int = 0) -> CertResult:
    """Smallest energy over random nonnegative profiles on the sphere ||u|| = radius"""
    grid = op_riesz.grid
    functional = EnergyFunctional(nl, op_riesz, alpha)
    rng = np.random.default_rng(seed)
    r = grid.nodes
    best = math.inf
    best_shape = None
    for k in range(samples):
        centers = rng.uniform(0.0, 3.0, size=3)
        widths = rng.uniform(0.2, 2.0, size=3)
        amps = rng.uniform(0.0, 1.0, size=3)
        profile = np.sum(amps[:, None] * np.exp(-((r[None, :] - centers[:, None]) / widths[:, None]) ** 2), axis=0)
        norm = h1_norm(RadialFunction(grid, profile))
        if norm == 0.0:
            continue
        profile *= radius / norm
        level = functional.value(profile)
        if level < best:
            best, best_shape = level, k
    return CertResult(
        name="mountain_pass_ring", passed=bool(best > 0.0), value=best, seed=seed,
        details={"alpha": alpha, "radius": radius, "samples": samples, "argmin_sample": best_shape,
                 "quarter_norm_sq": 0.25 * radius * radius},
    )


def ar_growth_profile(nl: Nonlinearity, e0: RadialFunction, t_mesh: np.ndarray, tau: Optional[float] = None) -> CertResult:
    """t -> (integral of F(t e0))^2 t^(-2/(1-tau)) must not decrease for t >= 1"""
    tau = nl.tau if tau is None else tau
    t = np.asarray([x for x in t_mesh if x >= 1.0], dtype=np.float64)
    w = e0.grid.weights
    logs = []
    for s in t:
        mass = float(np.dot(w, F_eval(nl, np.maximum(s * e0.values, 0.0))))
        if mass <= 0.0:
            raise NumericalError("Profile has no positive mass", {"t": float(s)})
        logs.append(2.0 * math.log(mass) - 2.0 / (1.0 - tau) * math.log(s))
    logs = np.asarray(logs)
    drops = np.diff(logs)
    worst = float(drops.min()) if drops.size else 0.0
    return CertResult(
        name="ar_growth", passed=bool(worst >= -1e-12), value=worst,
        details={"tau": tau, "t_range": [float(t[0]), float(t[-1])] if t.size else [], "log_profile": logs.tolist()},
    )
