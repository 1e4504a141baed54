from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, NonNegativeFloat, PositiveFloat, PositiveInt

from src.ambiguity.domain import DEFAULT_THRESHOLD, AmbiguityReport, AxisMethod
from src.bingham.domain import BinghamParams, PlotDataset
from src.metrics.domain import EvalAggregates, PoseEstimate
from src.stats.domain import ClusterSet

SelectionRule = Literal["largest-membership", "lowest-dispersion"]

DEFAULT_BANDWIDTH = np.pi / 4
OBJECT_BANDWIDTHS = {"cube": np.pi / 4, "cup": np.pi / 4, "cylinder": np.pi / 2}


class InferenceConfig(BaseModel):
    pca_threshold: PositiveFloat = DEFAULT_THRESHOLD
    singular_index: Literal[1, 2] = 2
    bandwidths: dict[str, PositiveFloat] = Field(default_factory=lambda: dict(OBJECT_BANDWIDTHS))
    default_bandwidth: PositiveFloat = DEFAULT_BANDWIDTH
    # radians
    weiszfeld_tol: PositiveFloat = 1e-7
    weiszfeld_max_iter: PositiveInt = 1000
    min_cluster_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)
    axis_method: AxisMethod = "plane"
    cluster_selection_rule: SelectionRule = "largest-membership"

    def bandwidth_for(self, object_id: Optional[str]) -> float:
        return self.bandwidths.get(object_id, self.default_bandwidth) if object_id else self.default_bandwidth

    def min_support(self, m: int) -> int:
        """Smallest cluster kept by mean shift for a set of m hypotheses."""
        return max(1, int(np.ceil(self.min_cluster_fraction * m)))


class ClusterPose(BaseModel):
    pose: PoseEstimate
    depth: float
    members: int
    dispersion: NonNegativeFloat


class InferenceResult(BaseModel):
    pose: PoseEstimate
    depth: float
    ambiguity: AmbiguityReport
    clusters: Optional[ClusterSet] = None
    cluster_poses: list[ClusterPose] = Field(default_factory=list)
    selected_cluster: Optional[int] = None
    selection_rule: SelectionRule = "largest-membership"
    confidence_sigma: NonNegativeFloat


class AnalysisResult(BaseModel):
    ambiguity: AmbiguityReport
    clusters: ClusterSet


class BinghamResult(BaseModel):
    cluster: Optional[int] = None
    params: BinghamParams
    plot: PlotDataset


class SweepRow(BaseModel):
    m: PositiveInt
    aggregates: EvalAggregates
