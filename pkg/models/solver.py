from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from models.energy import EnergyBreakdown
from models.grid import RadialFunction


@dataclass
class IterationRecord:
    iteration: int
    c_level: float
    residual: float
    step: float


@dataclass
class MountainPassResult:
    """Critical point found by the path phase plus local refinement"""
    u_star: RadialFunction
    c_level: float
    residual: float
    alpha: float
    iterations: int
    positivity_flag: bool
    energy: Optional[EnergyBreakdown]
    converged: bool
    path_levels: List[float] = field(default_factory=list)
    newton_iterations: int = 0
    history: List[IterationRecord] = field(default_factory=list)
    endpoint_scale: float = 0.0
    message: str = ""

    @property
    def min_value(self) -> float:
        return float(np.min(self.u_star.values))

    def summary(self) -> dict:
        return {
            "alpha": self.alpha,
            "c_level": self.c_level,
            "residual": self.residual,
            "iterations": self.iterations,
            "newton_iterations": self.newton_iterations,
            "converged": self.converged,
            "positivity_flag": self.positivity_flag,
            "endpoint_scale": self.endpoint_scale,
            "energy": self.energy.to_dict() if self.energy else None,
            "message": self.message,
        }


@dataclass
class ContinuationStep:
    alpha: float
    result: MountainPassResult
    dh1: Optional[float]
    log_residual: float
    energy_log: float
    norm: float
    decay_m: Optional[float] = None
    decay_rate: Optional[float] = None
    decay_passed: Optional[bool] = None


@dataclass
class ContinuationTrace:
    """alpha_1 > ... > alpha_K with one solved state per entry"""
    schedule: List[float]
    steps: List[ContinuationStep] = field(default_factory=list)
    completed: bool = False
    failure: str = ""

    @property
    def final(self) -> Optional[RadialFunction]:
        return self.steps[-1].result.u_star if self.steps else None

    def levels(self) -> List[float]:
        return [s.result.c_level for s in self.steps]

    def h1_increments(self) -> List[float]:
        return [s.dh1 for s in self.steps if s.dh1 is not None]
