import numpy as np
from pydantic import BaseModel, Field, PositiveInt, field_validator, model_validator

from src.rotation.domain import QuaternionList, Vector3List

CONCENTRATION_FLOOR = -900.0


class BinghamConfig(BaseModel):
    quadrature_nodes: PositiveInt = 200_000
    quadrature_seed: int = 0
    max_sweeps: PositiveInt = 50
    # relative mismatch between model and sample second moments
    tolerance: float = Field(default=1e-3, gt=0)
    concentration_floor: float = Field(default=CONCENTRATION_FLOOR, lt=0)


class BinghamParams(BaseModel):
    """Antipodally symmetric density p(q) = exp(q^T V Z V^T q - log_norm) on S^3.

    Columns of `orientation` are dispersion directions; the last one is the mode.
    """

    orientation: list[QuaternionList] = Field(min_length=4, max_length=4)
    concentrations: QuaternionList
    log_norm: float
    saturated: bool = False

    @field_validator("concentrations")
    @classmethod
    def check_concentrations(cls, value: list[float]) -> list[float]:
        if value[3] != 0.0:
            raise ValueError("the last concentration is pinned to 0")
        if not value[0] <= value[1] <= value[2] <= 0.0:
            raise ValueError("concentrations must satisfy l1 <= l2 <= l3 <= 0")
        return value

    @model_validator(mode="after")
    def check_orientation(self) -> "BinghamParams":
        v = self.orientation_matrix()
        if not np.allclose(v.T @ v, np.eye(4), atol=1e-9):
            raise ValueError("orientation must be orthonormal")
        return self

    def orientation_matrix(self) -> np.ndarray:
        return np.asarray(self.orientation, dtype=float)

    def concentration_array(self) -> np.ndarray:
        return np.asarray(self.concentrations, dtype=float)

    def mode(self) -> np.ndarray:
        return self.orientation_matrix()[:, 3]


class DensityGrid(BaseModel):
    res: PositiveInt
    values: list[float]


class PlotDataset(BaseModel):
    """Equatorial projection of a rotation distribution, for external plotting tools."""

    mode: QuaternionList
    points: list[Vector3List]
    grid: DensityGrid
