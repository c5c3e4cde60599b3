import math
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config import settings


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class GridSection(_Section):
    n: int = Field(2048, ge=3, description="Number of radial nodes")
    rmax: float = Field(40.0, gt=0, description="Truncation radius")
    grade: float = Field(1.01, ge=1.0, description="Geometric ratio of core spacings")
    core_cut: float = Field(0.25, gt=0, description="Radius where the geometric core ends")


class NonlinearitySection(_Section):
    family: str = Field("exp_critical", description="power | exp_critical | paper_example")
    kappa: float = Field(1.0, gt=0)
    q: Optional[float] = Field(None, gt=2, description="Exponent of the power family")
    a: float = Field(4.0 * math.pi, gt=0, description="Exponential growth rate")
    p: Optional[float] = Field(None, gt=1)
    tau: Optional[float] = Field(None, gt=0, lt=1)
    c_upper: Optional[float] = Field(None, gt=1)
    beta: Optional[float] = Field(None, gt=0)
    rho: float = Field(0.2, gt=0, lt=0.25)
    domain_max: float = Field(7.0, gt=0)

    @field_validator("family")
    @classmethod
    def known_family(cls, v: str) -> str:
        if v not in ("power", "exp_critical", "paper_example"):
            raise ValueError("must be one of power, exp_critical, paper_example")
        return v


class KernelSection(_Section):
    alpha: float = Field(0.5, gt=0, lt=1, description="Riesz exponent of the approximate kernel")
    cache_dir: str = Field("cache", description="Kernel operator store")
    workers: int = Field(4, ge=1, description="Assembly and path evaluation threads")


class SolverSection(_Section):
    enabled: bool = True
    path_nodes: int = Field(21, ge=2, description="Number of path segments m")
    tol: float = Field(1e-8, gt=0)
    tol_path: float = Field(1e-3, gt=0)
    max_iter: int = Field(400, ge=1)
    newton: bool = True
    newton_max_iter: int = Field(40, ge=1)
    reparam_every: int = Field(5, ge=1)
    endpoint_scale: float = Field(1.0, ge=1.0, description="Multiplier on the negative-energy endpoint")
    workers: int = Field(4, ge=1)


class ContinuationSection(_Section):
    alpha0: float = Field(0.5, gt=0, lt=1)
    steps: int = Field(9, ge=1)
    omega: float = Field(1.05, gt=1, lt=4, description="Decay exponent; kappa = 4(omega - 1)/(3 omega) stays below 1")
    burn_in: int = Field(3, ge=0)
    r_fit: float = Field(6.0, gt=0)
    decay_alpha_max: float = Field(0.1, gt=0)


class CertifySection(_Section):
    sets: List[str] = Field(default_factory=lambda: ["moser", "kernel", "hls", "level", "nonlinearity"])
    seed: int = 12345
    trials: int = Field(50, ge=1)
    moser_n: List[int] = Field(default_factory=lambda: [10, 100, 1000])
    moser_grid_n: int = Field(20000, ge=64)
    level_n: int = Field(50, ge=2)
    level_alphas: List[float] = Field(default_factory=lambda: [0.5, 0.1, 0.02])
    level_grid_n: int = Field(1024, ge=64)

    @field_validator("sets")
    @classmethod
    def known_sets(cls, v: List[str]) -> List[str]:
        allowed = {"moser", "kernel", "hls", "level", "nonlinearity", "radial"}
        unknown = [s for s in v if s not in allowed]
        if unknown:
            raise ValueError(f"unknown certificate sets {unknown}, allowed {sorted(allowed)}")
        return v


class OutputSection(_Section):
    dir: str = "runs"
    plots: bool = True


class RunConfig(BaseModel):
    """Validated run configuration, one nested model per config-file section"""
    model_config = ConfigDict(extra="forbid")

    grid: GridSection = Field(default_factory=GridSection)
    nonlinearity: NonlinearitySection = Field(default_factory=NonlinearitySection)
    kernel: KernelSection = Field(default_factory=KernelSection)
    solver: SolverSection = Field(default_factory=SolverSection)
    continuation: ContinuationSection = Field(default_factory=ContinuationSection)
    certify: CertifySection = Field(default_factory=CertifySection)
    output: OutputSection = Field(default_factory=OutputSection)
    warnings: List[str] = Field(default_factory=list, exclude=True)

    @model_validator(mode="after")
    def memory_bound(self):
        n = self.grid.n
        table_bytes = 16 * n * n
        if self.solver.enabled and (n > settings.MAX_OPERATOR_N or table_bytes > settings.OPERATOR_WARN_BYTES):
            self.warnings.append(
                f"grid.n={n} needs {table_bytes / 2**30:.1f} GiB for dense kernel tables "
                f"(bound N <= {settings.MAX_OPERATOR_N}); solves will be refused"
            )
        if self.grid.grade > 1.0 and self.grid.core_cut >= self.grid.rmax:
            raise ValueError("grid.core_cut must be smaller than grid.rmax")
        return self

    def echo(self) -> dict:
        return self.model_dump(mode="json")
