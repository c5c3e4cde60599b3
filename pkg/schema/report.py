from pydantic import BaseModel, ConfigDict, Field
from typing import Any, Dict, List, Optional


class CheckEntry(BaseModel):
    """Single pass/fail finding with its witness"""
    name: str
    passed: bool
    value: Optional[float] = Field(None, description="Observed quantity")
    bound: Optional[float] = Field(None, description="Quantity it was compared against")
    witness_t: Optional[float] = Field(None, description="Argument where the extreme value was observed")
    note: str = ""


class AssumptionReport(BaseModel):
    family: str
    constants: Dict[str, float] = Field(default_factory=dict)
    mesh: Dict[str, float] = Field(default_factory=dict)
    checks: List[CheckEntry] = Field(default_factory=list)
    flags: List[str] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckEntry:
        for entry in self.checks:
            if entry.name == name:
                return entry
        raise KeyError(name)

    def failed(self) -> List[str]:
        return [c.name for c in self.checks if not c.passed]


class CertResult(BaseModel):
    name: str
    passed: bool
    value: Optional[float] = None
    details: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None


class DiagReport(BaseModel):
    """Bounds a bounded Cerami sequence must satisfy, evaluated at one state"""
    level: float
    tau: float
    norm_sq: float
    h_norm_sq: float
    checks: List[CheckEntry] = Field(default_factory=list)
    values: Dict[str, float] = Field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckEntry:
        for entry in self.checks:
            if entry.name == name:
                return entry
        raise KeyError(name)


class LevelCertificate(BaseModel):
    n: int
    rho: float
    alpha: float
    t_mesh: List[float]
    levels: List[float]
    max_level: float
    t_at_max: float
    case_bounds: List[float] = Field(default_factory=lambda: [0.5 ** 0.5, 2.0 ** 0.5])
    psi_values: List[Optional[float]] = Field(default_factory=list)
    majorant: List[Optional[float]] = Field(default_factory=list)
    t_n: float
    psi_at_t_n: float
    n_min: Optional[int] = None
    truncated_at: Optional[float] = None
    threshold: float
    epsilon: Optional[float] = None
    t_eps: Optional[float] = None
    verdict_level: bool
    verdict_psi: bool
    verdict_majorant: bool
    notes: List[str] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.verdict_level and self.verdict_psi and self.verdict_majorant


class EnergyReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    quadratic: float
    mass: float
    riesz: float
    galpha: float
    total: float


class StepRecord(BaseModel):
    alpha: float
    c: float
    residual: float
    dh1: Optional[float] = None
    log_residual: float
    decay_rate: Optional[float] = None
    decay_m: Optional[float] = None
    energy_log: float
    norm: float


class RunSummary(BaseModel):
    """JSON summary written by every subcommand"""
    command: str
    config: Dict[str, Any]
    inputs_hash: str
    grid: Dict[str, Any] = Field(default_factory=dict)
    versions: Dict[str, str] = Field(default_factory=dict)
    timings: Dict[str, float] = Field(default_factory=dict)
    verdicts: Dict[str, bool] = Field(default_factory=dict)
    results: Dict[str, Any] = Field(default_factory=dict)
    artifacts: List[str] = Field(default_factory=list)
    warnings: List[str] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())
