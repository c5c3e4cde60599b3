# functions/grid.py
import logging
import math
from typing import Iterable, Optional, Tuple

import numpy as np

from exceptions import ConfigurationError, GridMismatchError
from models.grid import RadialFunction, RadialGrid

logger = logging.getLogger("choquard")

# Innermost geometric node is pushed toward this radius
SMALLEST_CORE_NODE = 1e-9


# =================== CONSTRUCTION ===================

def area_weights(nodes: np.ndarray) -> np.ndarray:
    """Trapezoid weights in s = r^2 scaled by pi; sum equals pi * r_max^2 exactly.

    The rule integrates functions that are piecewise linear in r^2 without error.
    """
    s = nodes * nodes
    w = np.empty_like(s)
    w[1:-1] = 0.5 * np.pi * (s[2:] - s[:-2])
    w[0] = 0.5 * np.pi * (s[1] - s[0])
    w[-1] = 0.5 * np.pi * (s[-1] - s[-2])
    return w


def make_grid(n: int, r_max: float, grade: float = 1.0, core_cut: float = 0.25) -> RadialGrid:
    """
    Build a radial grid: geometric refinement toward 0 below core_cut, uniform above.

    Args:
        n: Number of nodes (>= 3)
        r_max: Truncation radius
        grade: Ratio of neighbouring core spacings (1 gives a uniform grid)
        core_cut: Radius where geometric spacing hands over to uniform spacing

    Returns:
        RadialGrid
    """
    if int(n) != n or n < 3:
        raise ConfigurationError(f"grid.n must be an integer >= 3, got {n}", {"key": "grid.n"})
    if not (r_max > 0 and math.isfinite(r_max)):
        raise ConfigurationError(f"grid.rmax must be positive, got {r_max}", {"key": "grid.rmax"})
    if not grade >= 1.0:
        raise ConfigurationError(f"grid.grade must be >= 1, got {grade}", {"key": "grid.grade"})
    n = int(n)

    if grade == 1.0:
        nodes = np.linspace(0.0, r_max, n)
        return RadialGrid(nodes=nodes, weights=area_weights(nodes), core_cut=0.0, r_max=float(r_max), grade=1.0)

    if not 0.0 < core_cut < r_max:
        raise ConfigurationError(
            f"grid.core_cut must lie in (0, rmax), got {core_cut}", {"key": "grid.core_cut"}
        )

    wanted = math.ceil(math.log(core_cut / SMALLEST_CORE_NODE) / math.log(grade))
    k_core = min(wanted, n // 4)
    core = core_cut * grade ** -np.arange(k_core, 0, -1, dtype=np.float64)
    outer = np.linspace(core_cut, r_max, n - k_core - 1)
    nodes = np.concatenate(([0.0], core, outer))

    if np.any(np.diff(nodes) <= 0):
        raise ConfigurationError("Grid nodes are not strictly increasing", {"key": "grid.grade"})

    if k_core < wanted:
        logger.debug(
            f"🔁 core refinement capped at {k_core} nodes, innermost node {nodes[1]:.3e}"
        )

    return RadialGrid(nodes=nodes, weights=area_weights(nodes), core_cut=float(core_cut),
                      r_max=float(r_max), grade=float(grade))


def with_nodes(grid: RadialGrid, extra: Iterable[float]) -> RadialGrid:
    """Return a grid that also contains the given radii (kinks of piecewise profiles)"""
    extra = np.asarray(list(extra), dtype=np.float64)
    extra = extra[(extra > 0.0) & (extra < grid.r_max)]
    if extra.size:
        present = np.isclose(extra[:, None], grid.nodes[None, :], rtol=0.0, atol=1e-14 * grid.r_max).any(axis=1)
        extra = extra[~present]
    if extra.size == 0:
        return grid
    nodes = np.union1d(grid.nodes, extra)
    # drop near-duplicates so no cell collapses
    keep = np.concatenate(([True], np.diff(nodes) > 1e-14 * grid.r_max))
    nodes = nodes[keep]
    return RadialGrid(nodes=nodes, weights=area_weights(nodes), core_cut=grid.core_cut,
                      r_max=grid.r_max, grade=grid.grade)


def sample(grid: RadialGrid, func) -> RadialFunction:
    """Evaluate a vectorized callable of r on the grid"""
    return RadialFunction(grid, np.asarray(func(grid.nodes), dtype=np.float64))


def ensure_same_grid(*funcs: RadialFunction, grid: Optional[RadialGrid] = None) -> RadialGrid:
    reference = grid if grid is not None else funcs[0].grid
    for u in funcs:
        if u.grid is not reference and u.grid.hash != reference.hash:
            raise GridMismatchError(
                "Radial function lives on a different grid",
                {"expected": reference.hash, "found": u.grid.hash},
            )
    return reference


# =================== QUADRATURE ===================

def integrate(g: RadialFunction, grid: Optional[RadialGrid] = None) -> float:
    """Planar integral of a radial function, sum of g_i w_i"""
    g_grid = ensure_same_grid(g, grid=grid)
    return float(np.dot(g.values, g_grid.weights))


def gradient_energy(u: RadialFunction) -> float:
    """Integral of |grad u|^2 for the piecewise-linear interpolant of u"""
    du = np.diff(u.values)
    return float(np.dot(u.grid.cell_coefficients, du * du))


def h1_norm(u: RadialFunction) -> float:
    """H^1 norm: (integral of |grad u|^2 + u^2)^(1/2) with the grid's own quadrature"""
    mass = float(np.dot(u.grid.weights, u.values * u.values))
    return math.sqrt(gradient_energy(u) + mass)


def h1_inner(u: RadialFunction, v: RadialFunction) -> float:
    ensure_same_grid(u, v)
    stiff = float(np.dot(u.grid.cell_coefficients, np.diff(u.values) * np.diff(v.values)))
    return stiff + float(np.dot(u.grid.weights, u.values * v.values))


def lp_norm(u: RadialFunction, p: float) -> float:
    if not p >= 1.0:
        raise ConfigurationError(f"L^p exponent must be >= 1, got {p}", {"p": p})
    if math.isinf(p):
        return float(np.max(np.abs(u.values)))
    return float(np.dot(u.grid.weights, np.abs(u.values) ** p)) ** (1.0 / p)


def radial_derivative(u: RadialFunction) -> np.ndarray:
    """Second-order centered derivative on the nonuniform mesh, u'(0) = 0"""
    du = np.gradient(u.values, u.grid.nodes, edge_order=2)
    du[0] = 0.0
    return du


# =================== DISCRETE OPERATORS ===================

def stiffness_banded(grid: RadialGrid, mass_shift: bool = True) -> np.ndarray:
    """Upper banded form (2, N) of K (+ W) for scipy.linalg.solveh_banded"""
    c = grid.cell_coefficients
    diag = np.zeros(grid.n)
    diag[:-1] += c
    diag[1:] += c
    if mass_shift:
        diag = diag + grid.weights
    banded = np.zeros((2, grid.n))
    banded[0, 1:] = -c
    banded[1] = diag
    return banded


def stiffness_dense(grid: RadialGrid, mass_shift: bool = True) -> np.ndarray:
    banded = stiffness_banded(grid, mass_shift)
    matrix = np.diag(banded[1])
    off = banded[0, 1:]
    idx = np.arange(grid.n - 1)
    matrix[idx, idx + 1] = off
    matrix[idx + 1, idx] = off
    return matrix


def apply_stiffness(u: np.ndarray, grid: RadialGrid, mass_shift: bool = True) -> np.ndarray:
    """(K + W) u without forming the matrix; K is the weak-form -Laplacian"""
    c = grid.cell_coefficients
    flux = c * np.diff(u)
    out = np.zeros_like(u)
    out[:-1] -= flux
    out[1:] += flux
    if mass_shift:
        out += grid.weights * u
    return out


# =================== TRANSFER ===================

def resample(u: RadialFunction, target: RadialGrid) -> RadialFunction:
    """Piecewise-linear transfer onto another grid, zero beyond the old r_max"""
    if target is u.grid:
        return RadialFunction(target, u.values.copy())
    values = np.interp(target.nodes, u.grid.nodes, u.values, right=0.0)
    return RadialFunction(target, values)


def tail_mass(u: RadialFunction, r_from: float) -> Tuple[float, float]:
    """Mass of u^2 beyond r_from and its share of the total (truncation report)"""
    mask = u.grid.nodes >= r_from
    total = float(np.dot(u.grid.weights, u.values ** 2))
    tail = float(np.dot(u.grid.weights[mask], u.values[mask] ** 2))
    return tail, (tail / total if total > 0 else 0.0)
