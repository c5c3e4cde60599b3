from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from models.grid import RadialGrid

KERNEL_KINDS = ("riesz", "riesz_minus_one", "log")


@dataclass(frozen=True)
class KernelSpec:
    """Which radial kernel to convolve with.

    ``riesz`` is |x|^(-alpha), ``riesz_minus_one`` is G_alpha = (|x|^(-alpha) - 1)/alpha
    and ``log`` is ln(1/|x|).
    """
    kind: str
    alpha: Optional[float] = None

    def label(self) -> str:
        return self.kind if self.alpha is None else f"{self.kind}(alpha={self.alpha:.6g})"


@dataclass(frozen=True, eq=False)
class ConvolutionOperator:
    """Dense radial convolution on one grid.

    ``averages[i, j]`` is the angular average of the kernel between radii r_i and r_j
    (symmetric), and ``table = averages * weights[None, :]`` so that
    ``(K * g)(r_i) ~ table[i] @ g``.
    """
    grid: RadialGrid
    spec: KernelSpec
    averages: np.ndarray
    tolerance: float = 1e-8
    validation_error: float = 0.0
    table: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "table", self.averages * self.grid.weights[None, :])

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def nbytes(self) -> int:
        return int(self.averages.nbytes + self.table.nbytes)
