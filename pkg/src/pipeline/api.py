from typing import Optional

import numpy as np
from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, Field

from src.model.domain import HypothesisSet
from src.pipeline.domain import AnalysisResult, BinghamResult, InferenceConfig, InferenceResult
from src.pipeline.service import analyze_hypotheses, bingham_plots, infer
from src.rotation.domain import QuaternionList
from src.rotation.service import _to_hemisphere, normalize
from src.toy.domain import PinholeCamera


# Request Models
class AnalyzeRequest(BaseModel):
    rotations: list[QuaternionList] = Field(min_length=2)
    object_id: Optional[str] = None
    config: InferenceConfig = Field(default_factory=InferenceConfig)


class InferRequest(BaseModel):
    hypotheses: HypothesisSet
    camera: PinholeCamera = Field(default_factory=PinholeCamera)
    bbox_center: tuple[float, float]
    object_id: Optional[str] = None
    config: InferenceConfig = Field(default_factory=InferenceConfig)


class BinghamRequest(BaseModel):
    rotations: list[QuaternionList] = Field(min_length=1)
    per_cluster: bool = False
    bandwidth: float = Field(default=np.pi / 4, gt=0)


def _rotations(rows: list[list[float]]) -> np.ndarray:
    return _to_hemisphere(np.atleast_2d(normalize(rows)))


# Router
router = APIRouter(tags=["pose"])


@router.post("/analyze", response_model=AnalysisResult)
def analyze_endpoint(request: AnalyzeRequest):
    try:
        return analyze_hypotheses(_rotations(request.rotations), request.config, request.object_id)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))


@router.post("/infer", response_model=InferenceResult)
def infer_endpoint(request: InferRequest):
    try:
        return infer(request.hypotheses, request.camera, request.bbox_center, request.config, request.object_id)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))


@router.post("/bingham", response_model=list[BinghamResult])
def bingham_endpoint(request: BinghamRequest):
    try:
        return bingham_plots(_rotations(request.rotations), request.per_cluster, request.bandwidth)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
