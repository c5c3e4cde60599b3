import math
from dataclasses import asdict, dataclass

FAMILIES = ("power", "exp_critical", "paper_example")

# Largest t the closed-form example is defined for: ln(1 + t) < 1
EXAMPLE_SINGULARITY = math.e - 1.0


@dataclass(frozen=True)
class Nonlinearity:
    """Nonlinearity F with f = F', f' = F'' and the constants it declares.

    ``tau``/``c_upper`` bound F f' / f^2, ``beta``/``rho`` enter the growth
    condition at infinity, ``p``/``c_upper``/``t_bar``/``t_tilde`` describe
    the growth envelope F <= C t^2 near 0 and F <= C t^(p-1) e^(a t^2) at infinity.
    """
    family: str
    kappa: float = 1.0
    q: float = 3.0
    a: float = 4.0 * math.pi
    p: float = 4.0
    tau: float = 0.6
    c_upper: float = 1.1
    beta: float = 1000.0
    rho: float = 0.2
    domain_max: float = 7.0
    t_bar: float = 0.25
    t_tilde: float = 0.25

    @property
    def effective_max(self) -> float:
        """Largest admissible argument, exclusive for the closed-form example"""
        if self.family == "paper_example":
            return min(self.domain_max, EXAMPLE_SINGULARITY)
        return self.domain_max

    def to_dict(self) -> dict:
        return asdict(self)
