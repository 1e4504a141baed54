from dataclasses import dataclass
from typing import Optional

import numpy as np
from pydantic import (
    BaseModel,
    Field,
    NonNegativeFloat,
    PositiveFloat,
    PositiveInt,
    field_validator,
    model_validator,
)

from src.rotation.domain import UNIT_TOLERANCE, QuaternionList
from src.toy.domain import OBSERVATION_WIDTH

MODEL_VERSION = "mhp-model/1"
# each hypothesis head emits 4 rotation numbers and 1 depth
HEAD_WIDTH = 5


class HypothesisSet(BaseModel):
    """M (rotation, depth) predictions for one observation; rotations in hemisphere form."""

    rotations: list[QuaternionList] = Field(min_length=1)
    depths: list[float] = Field(min_length=1)

    @model_validator(mode="after")
    def check_hypotheses(self) -> "HypothesisSet":
        if len(self.rotations) != len(self.depths):
            raise ValueError("rotations and depths must have one entry per hypothesis")
        rotations = self.rotation_array()
        if np.any(np.abs(np.linalg.norm(rotations, axis=1) - 1.0) > UNIT_TOLERANCE):
            raise ValueError("every rotation must be a unit quaternion")
        if np.any(rotations[:, 0] < 0.0):
            raise ValueError("rotations must be in hemisphere form (q1 >= 0)")
        return self

    @property
    def m(self) -> int:
        return len(self.rotations)

    def rotation_array(self) -> np.ndarray:
        return np.asarray(self.rotations, dtype=float).reshape(-1, 4)

    def depth_array(self) -> np.ndarray:
        return np.asarray(self.depths, dtype=float)


class ModelSpec(BaseModel):
    input_width: PositiveInt = OBSERVATION_WIDTH
    hidden_sizes: list[PositiveInt] = Field(default_factory=lambda: [128, 128])
    m: PositiveInt = 30
    leaky_slope: NonNegativeFloat = 0.01
    seed: int = 0

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_width, *self.hidden_sizes, HEAD_WIDTH * self.m]


class TrainConfig(BaseModel):
    epochs: PositiveInt = 20
    batch_size: PositiveInt = 10
    learning_rate: PositiveFloat = 1e-4
    # geometric per-epoch decay towards this rate; None keeps the rate constant
    learning_rate_end: Optional[PositiveFloat] = None
    epsilon_start: NonNegativeFloat = 0.05
    epsilon_end: NonNegativeFloat = 0.01
    lambda_depth: NonNegativeFloat = 3.0
    dropout_p: NonNegativeFloat = 0.5
    adam_beta1: float = Field(default=0.9, ge=0, lt=1)
    adam_beta2: float = Field(default=0.999, ge=0, lt=1)
    adam_epsilon: PositiveFloat = 1e-8
    seed: int = 0

    @field_validator("dropout_p", "epsilon_start", "epsilon_end")
    @classmethod
    def check_below_one(cls, value: float) -> float:
        if value >= 1.0:
            raise ValueError("must be smaller than 1")
        return value


@dataclass
class RegressorModel:
    """Fully connected regressor: leaky-ReLU hidden layers and a linear M*5 output."""

    spec: ModelSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def m(self) -> int:
        return self.spec.m

    @property
    def layer_sizes(self) -> list[int]:
        return self.spec.layer_sizes

    def parameters(self) -> list[np.ndarray]:
        """Arrays in layer order (W1, b1, W2, b2, ...); updated in place by training."""
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def flat_parameters(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    @classmethod
    def from_flat(cls, spec: ModelSpec, flat: np.ndarray) -> "RegressorModel":
        sizes = spec.layer_sizes
        expected = sum(n_out * n_in + n_out for n_in, n_out in zip(sizes, sizes[1:]))
        if flat.size != expected:
            raise ValueError(f"Expected {expected} parameters for layers {sizes}, got {flat.size}")
        weights, biases = [], []
        offset = 0
        for n_in, n_out in zip(sizes, sizes[1:]):
            weights.append(flat[offset:offset + n_out * n_in].reshape(n_out, n_in).copy())
            offset += n_out * n_in
            biases.append(flat[offset:offset + n_out].copy())
            offset += n_out
        return cls(spec, weights, biases)


class EpochRecord(BaseModel):
    epoch: int
    epsilon: float
    learning_rate: Optional[float] = None
    mean_loss: float
    winner_histogram: list[int]


class TrainingLog(BaseModel):
    epochs: list[EpochRecord] = Field(default_factory=list)
