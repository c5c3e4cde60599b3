from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class EnergyBreakdown:
    """Terms of the approximate energy.

    total = quadratic + mass - riesz = quadratic - galpha
    """
    quadratic: float
    mass: float
    riesz: float
    galpha: float
    total: float

    def split_gap(self) -> float:
        """Relative disagreement between the two forms of the total"""
        split = self.quadratic + self.mass - self.riesz
        return abs(split - self.total) / max(1.0, abs(self.total))

    def to_dict(self) -> dict:
        return asdict(self)
