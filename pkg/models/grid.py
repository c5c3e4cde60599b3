import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from exceptions import GridMismatchError, NumericalError


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Radial mesh 0 = r_0 < ... < r_{N-1} = r_max with area weights for integrals over the plane.

    ``weights[i]`` is the disk area attributed to node ``i`` so that
    ``sum(g(r_i) * w_i)`` approximates the planar integral of a radial ``g``.
    """
    nodes: np.ndarray
    weights: np.ndarray
    core_cut: float
    r_max: float
    grade: float = 1.0

    @property
    def n(self) -> int:
        return int(self.nodes.size)

    @cached_property
    def hash(self) -> str:
        """Content hash of the node positions (reproducibility header)"""
        return hashlib.sha256(np.ascontiguousarray(self.nodes, dtype=np.float64).tobytes()).hexdigest()[:16]

    @cached_property
    def cell_coefficients(self) -> np.ndarray:
        """pi (r_{i+1}^2 - r_i^2) / (r_{i+1} - r_i)^2, the P1 stiffness of each cell"""
        r = self.nodes
        dr = np.diff(r)
        return np.pi * (r[1:] + r[:-1]) / dr

    def describe(self) -> dict:
        return {
            "n": self.n,
            "r_max": float(self.r_max),
            "grade": float(self.grade),
            "core_cut": float(self.core_cut),
            "min_spacing": float(np.diff(self.nodes).min()),
            "hash": self.hash,
        }


@dataclass(frozen=True, eq=False)
class RadialFunction:
    """Samples of a radial profile u(r_i) on a fixed grid"""
    grid: RadialGrid
    values: np.ndarray
    derivative: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.grid.nodes.shape:
            raise NumericalError(
                f"Sample count {values.size} does not match grid size {self.grid.n}",
                {"samples": int(values.size), "grid_n": self.grid.n},
            )
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise NumericalError(
                "Radial function has non-finite samples",
                {"first_index": bad, "r": float(self.grid.nodes[bad])},
            )
        object.__setattr__(self, "values", values)

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def with_values(self, values: np.ndarray) -> "RadialFunction":
        return RadialFunction(self.grid, values)

    def _check(self, other: "RadialFunction"):
        if other.grid is not self.grid and other.grid.hash != self.grid.hash:
            raise GridMismatchError(
                "Operands live on different grids",
                {"left": self.grid.hash, "right": other.grid.hash},
            )

    def __add__(self, other: "RadialFunction") -> "RadialFunction":
        self._check(other)
        return RadialFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "RadialFunction") -> "RadialFunction":
        self._check(other)
        return RadialFunction(self.grid, self.values - other.values)

    def __mul__(self, scale: float) -> "RadialFunction":
        return RadialFunction(self.grid, self.values * float(scale))

    __rmul__ = __mul__
