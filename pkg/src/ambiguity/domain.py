from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, NonNegativeFloat, model_validator

from src.rotation.domain import Vector3List

DEFAULT_THRESHOLD = 0.8
# the threshold is calibrated for this many hypotheses; singular values grow with sqrt(M)
CALIBRATION_HYPOTHESES = 30
DEGENERATE_RATIO = 1e-3
# relative-rotation axes disagree past this ratio of second to first singular value
RELATIVE_SPREAD_RATIO = 0.5

AxisMethod = Literal["plane", "relative"]


class AmbiguityReport(BaseModel):
    singular_values: list[NonNegativeFloat] = Field(min_length=1)
    ambiguous: bool
    axis: Optional[Vector3List] = None
    axis_residual: NonNegativeFloat = 0.0
    degenerate_axis: bool = False
    threshold: float = DEFAULT_THRESHOLD
    singular_index: int = 2
    axis_method: AxisMethod = "plane"

    @model_validator(mode="after")
    def check_axis_presence(self) -> "AmbiguityReport":
        if any(a < b for a, b in zip(self.singular_values, self.singular_values[1:])):
            raise ValueError("singular values must be sorted in descending order")
        expected = self.ambiguous and not self.degenerate_axis
        if (self.axis is not None) != expected:
            raise ValueError("axis is present exactly when the view is ambiguous and the axis is not degenerate")
        return self

    def axis_array(self) -> Optional[np.ndarray]:
        return None if self.axis is None else np.asarray(self.axis, dtype=float)
