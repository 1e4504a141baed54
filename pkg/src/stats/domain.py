from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, NonNegativeFloat, model_validator

from src.rotation.domain import QuaternionList


class ClusterSet(BaseModel):
    """Modes found by mean shift; `counts[k]` points are assigned to `modes[k]`."""

    modes: list[QuaternionList]
    assignments: list[int]
    counts: list[int]

    @model_validator(mode="after")
    def check_consistency(self) -> "ClusterSet":
        if len(self.counts) != len(self.modes):
            raise ValueError("counts must have one entry per mode")
        if any(a < 0 or a >= len(self.modes) for a in self.assignments):
            raise ValueError("assignment refers to a missing mode")
        if sum(self.counts) != len(self.assignments):
            raise ValueError("counts must sum to the number of assigned points")
        return self

    def mode_array(self) -> np.ndarray:
        return np.asarray(self.modes, dtype=float).reshape(-1, 4)

    def members(self, index: int) -> list[int]:
        return [i for i, a in enumerate(self.assignments) if a == index]


class DispersionStats(BaseModel):
    karcher_mean: QuaternionList
    sigma: NonNegativeFloat


@dataclass
class AveragingResult:
    """Outcome of an iterative rotation average."""

    quaternion: np.ndarray
    iterations: int
    converged: bool
    objective_history: list[float] = field(default_factory=list)
