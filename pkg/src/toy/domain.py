from dataclasses import dataclass
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, Field, NonNegativeFloat, PositiveFloat, PositiveInt, model_validator

from src.rotation.domain import QuaternionList, Vector3List

TOYSET_VERSION = "toyset/1"
OBSERVATION_WIDTH = 10
# canonical rotations are snapped to this many decimals so equivalent poses encode bit-identically
CANONICAL_DECIMALS = 9

ObjectId = Literal["cube", "cup", "cylinder"]


class PinholeCamera(BaseModel):
    fx: PositiveFloat = 572.4114
    fy: PositiveFloat = 573.5704
    cx: float = 325.2611
    cy: float = 242.0490
    width: PositiveInt = 640
    height: PositiveInt = 480


class ToyConfig(BaseModel):
    depth_range: tuple[PositiveFloat, PositiveFloat] = (0.5, 2.0)
    noise_sigma: NonNegativeFloat = 0.01

    @model_validator(mode="after")
    def check_depth_range(self) -> "ToyConfig":
        if self.depth_range[0] >= self.depth_range[1]:
            raise ValueError("depth_range must be increasing")
        return self


@dataclass(frozen=True)
class FiniteGroup:
    """Finite rotation group in the object frame, identity first."""

    elements: np.ndarray
    axis: np.ndarray


@dataclass(frozen=True)
class ViewConditionalArc:
    """Rotations about `axis` stay indistinguishable while `feature` points away from the camera.

    The feature is hidden when its camera-frame z component exceeds `visibility_threshold`.
    A threshold of -inf never reveals the feature: the continuous group about the axis.
    """

    axis: np.ndarray
    feature: np.ndarray
    visibility_threshold: float


Symmetry = Union[FiniteGroup, ViewConditionalArc]


@dataclass(frozen=True)
class ToyObject:
    id: str
    model_points: np.ndarray
    symmetry: Symmetry

    @property
    def diameter(self) -> float:
        deltas = self.model_points[:, None, :] - self.model_points[None, :, :]
        return float(np.max(np.linalg.norm(deltas, axis=-1)))

    @property
    def symmetry_axis(self) -> np.ndarray:
        return self.symmetry.axis


@dataclass(frozen=True)
class SymmetrySet:
    """Rotations equivalent to `pose`: a finite member list or an arc pose * Rot_axis(theta)."""

    pose: np.ndarray
    members: Optional[np.ndarray] = None
    axis: Optional[np.ndarray] = None
    interval: Optional[tuple[float, float]] = None

    @property
    def is_arc(self) -> bool:
        return self.interval is not None

    @property
    def is_ambiguous(self) -> bool:
        if self.is_arc:
            return self.interval[1] > self.interval[0]
        return len(self.members) > 1


class ToySample(BaseModel):
    observation: Annotated[list[float], Field(min_length=OBSERVATION_WIDTH, max_length=OBSERVATION_WIDTH)]
    gt_rotation: QuaternionList
    gt_depth: PositiveFloat
    bbox_center: tuple[float, float]
    intrinsics: PinholeCamera
    ambiguous_gt: bool
    gt_axis_camera: Optional[Vector3List] = None


class ToysetHeader(BaseModel):
    version: str = TOYSET_VERSION
    object_id: ObjectId
    diameter: PositiveFloat
    symmetry: str
    camera: PinholeCamera
    seed: int
    n: int
    depth_range: tuple[PositiveFloat, PositiveFloat]
    noise_sigma: NonNegativeFloat
