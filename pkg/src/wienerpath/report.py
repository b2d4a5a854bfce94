"""Estimate records shared by every Monte-Carlo / quadrature engine."""

import json
from dataclasses import asdict, dataclass, field


@dataclass
class EstimateReport:
    """A numerical estimate with enough metadata to regenerate it."""
    estimate: float
    stderr: float
    samples: int
    n: int                      # partition segment count
    mesh: float
    manifold: dict
    scheme: str = "mc"
    functional: str = ""
    seed: int | None = None
    workers: int = 1
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("stderr must be nonnegative")

    @property
    def ci95(self):
        return 1.96 * self.stderr

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))

    def same_numbers(self, other):
        """Equality modulo wall time (the reproducibility contract)."""
        a, b = asdict(self), asdict(other)
        a.pop("wall_time")
        b.pop("wall_time")
        return a == b
