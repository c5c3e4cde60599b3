import math
from dataclasses import dataclass

from exceptions import ConfigurationError


@dataclass(frozen=True)
class MoserConfig:
    """Index n and support radius rho of a Moser-type cap function"""
    n: int
    rho: float = 0.2

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ConfigurationError(f"Moser index must be an integer >= 2, got {self.n}", {"n": self.n})
        if not 0.0 < self.rho < 0.25:
            raise ConfigurationError(f"Moser radius must lie in (0, 1/4), got {self.rho}", {"rho": self.rho})

    @property
    def inner_radius(self) -> float:
        return self.rho / self.n

    @property
    def peak(self) -> float:
        """Value on the inner disk, sqrt(ln n / 2 pi)"""
        return math.sqrt(math.log(self.n) / (2.0 * math.pi))
