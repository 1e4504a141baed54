from typing import Annotated, Optional, Union

import numpy as np
from pydantic import BaseModel, Field, NonNegativeFloat, NonNegativeInt, model_validator

from src.rotation.domain import UNIT_TOLERANCE, QuaternionList, Vector3List

# dispersion thresholds (radians) of the confidence table; None keeps every view
CONFIDENCE_THRESHOLDS: tuple[Optional[float], ...] = (0.05, 0.075, 0.10, 0.15, None)
PASS_FRACTION = 0.1

UnitInterval = Annotated[float, Field(ge=0.0, le=1.0)]


class PoseEstimate(BaseModel):
    rotation: QuaternionList
    translation: Vector3List

    @model_validator(mode="after")
    def check_unit_rotation(self) -> "PoseEstimate":
        if abs(float(np.linalg.norm(self.rotation)) - 1.0) > UNIT_TOLERANCE:
            raise ValueError("rotation must be a unit quaternion")
        return self

    def rotation_array(self) -> np.ndarray:
        return np.asarray(self.rotation, dtype=float)

    def translation_array(self) -> np.ndarray:
        return np.asarray(self.translation, dtype=float)


class EvalRecord(BaseModel):
    index: NonNegativeInt
    add_err: NonNegativeFloat
    adi_err: NonNegativeFloat
    add_pass: bool
    adi_pass: bool
    rot_err_deg: NonNegativeFloat
    trans_err_mm: NonNegativeFloat
    sigma: NonNegativeFloat
    ambiguous_pred: bool
    ambiguous_gt: bool
    axis_dev_deg: Optional[NonNegativeFloat] = None
    n_clusters: Optional[NonNegativeInt] = None


class EvalAggregates(BaseModel):
    n: NonNegativeInt
    add_acc: UnitInterval
    adi_acc: UnitInterval
    mean_rot_err_deg: NonNegativeFloat
    mean_trans_err_mm: NonNegativeFloat
    acc_unambiguous: Optional[UnitInterval] = None
    acc_ambiguous: Optional[UnitInterval] = None
    mean_axis_dev_deg: Optional[NonNegativeFloat] = None
    expected_modes: Optional[NonNegativeInt] = None
    mode_recovery: Optional[UnitInterval] = None


class ConfidenceRow(BaseModel):
    threshold: Optional[float]
    retained: NonNegativeInt
    reject_pct: float = Field(ge=0.0, le=100.0)
    mean_rot_err_deg: Optional[NonNegativeFloat] = None
    mean_trans_err_mm: Optional[NonNegativeFloat] = None
    add_acc: Optional[UnitInterval] = None
    adi_acc: Optional[UnitInterval] = None


class EvalReport(BaseModel):
    aggregates: EvalAggregates
    confidence_table: list[ConfidenceRow]
    records: list[EvalRecord]
    metadata: dict[str, Union[str, float, int, bool, None]] = Field(default_factory=dict)
