"""Hypothesis fusion, dataset evaluation and the hypothesis-count sweep."""
import logging
import warnings
from typing import Optional, Sequence

import numpy as np

from src.ambiguity.domain import CALIBRATION_HYPOTHESES, AmbiguityReport
from src.ambiguity.service import analyze, axis_deviation, calibrate_threshold, centered_singular_values, scaled_threshold
from src.bingham.domain import BinghamConfig
from src.bingham.service import fit, project_equatorial
from src.errors import EmptyDatasetError, WideSpreadWarning
from src.metrics.domain import PASS_FRACTION, EvalRecord, EvalReport, PoseEstimate
from src.metrics.service import (
    add_error,
    adi_error,
    build_report,
    rotation_error_deg,
    translation_error_mm,
)
from src.model.domain import HypothesisSet, ModelSpec, RegressorModel, TrainConfig
from src.model.service import predict, train
from src.pipeline.domain import (
    AnalysisResult,
    BinghamResult,
    ClusterPose,
    InferenceConfig,
    InferenceResult,
    SelectionRule,
    SweepRow,
)
from src.rotation.service import _to_hemisphere, as_unit_quaternion
from src.stats.domain import ClusterSet
from src.stats.service import dispersion, mean_shift, median_scalar, weiszfeld_median
from src.toy.domain import FiniteGroup, PinholeCamera, ToyObject, ToySample
from src.toy.service import backproject

logger = logging.getLogger(__name__)

# predicted depths are floored here during evaluation so a poor model scores as a miss
MIN_EVAL_DEPTH = 1e-3


def select_cluster(
    counts: Sequence[int],
    dispersions: Sequence[float],
    rule: SelectionRule = "largest-membership",
) -> int:
    """Index of the chosen cluster; ties go to the lowest index."""
    if rule == "lowest-dispersion":
        return min(range(len(dispersions)), key=lambda i: (dispersions[i], i))
    return min(range(len(counts)), key=lambda i: (-counts[i], i))


def _sigma(rotations: np.ndarray, quiet: bool) -> float:
    with warnings.catch_warnings():
        if quiet:
            warnings.simplefilter("ignore", WideSpreadWarning)
        return dispersion(rotations).sigma


def _pose(camera: PinholeCamera, bbox_center: tuple[float, float], rotation: np.ndarray, depth: float) -> PoseEstimate:
    u, v = bbox_center
    return PoseEstimate(rotation=rotation.tolist(), translation=backproject(camera, u, v, depth).tolist())


def _cluster(rotations: np.ndarray, config: InferenceConfig, object_id: Optional[str]) -> ClusterSet:
    return mean_shift(
        rotations,
        config.bandwidth_for(object_id),
        weiszfeld_tol=config.weiszfeld_tol,
        weiszfeld_max_iter=config.weiszfeld_max_iter,
        min_support=config.min_support(len(rotations)),
    )


def infer(
    hyps: HypothesisSet,
    camera: PinholeCamera,
    bbox_center: tuple[float, float],
    config: Optional[InferenceConfig] = None,
    object_id: Optional[str] = None,
) -> InferenceResult:
    """Fuse a hypothesis set into one pose.

    Ambiguous sets are clustered by mean shift and fused per cluster; the selection rule
    picks the reported cluster. Otherwise every hypothesis is fused together. Depth is
    the median of the fused depths and the translation is back-projected through the
    box centre.
    """
    config = config or InferenceConfig()
    rotations = _to_hemisphere(hyps.rotation_array())
    depths = hyps.depth_array()
    ambiguity = analyze(rotations, config.pca_threshold, config.singular_index, config.axis_method)
    confidence = _sigma(rotations, quiet=ambiguity.ambiguous)

    if not ambiguity.ambiguous:
        rotation = weiszfeld_median(rotations, config.weiszfeld_tol, config.weiszfeld_max_iter)
        depth = median_scalar(depths)
        return InferenceResult(
            pose=_pose(camera, bbox_center, rotation, depth),
            depth=depth,
            ambiguity=ambiguity,
            selection_rule=config.cluster_selection_rule,
            confidence_sigma=confidence,
        )

    clusters = _cluster(rotations, config, object_id)
    cluster_poses = []
    for k in range(len(clusters.modes)):
        members = clusters.members(k)
        assert members, "mean shift left an empty cluster"
        rotation = weiszfeld_median(rotations[members], config.weiszfeld_tol, config.weiszfeld_max_iter)
        depth = median_scalar(depths[members])
        cluster_poses.append(
            ClusterPose(
                pose=_pose(camera, bbox_center, rotation, depth),
                depth=depth,
                members=len(members),
                dispersion=_sigma(rotations[members], quiet=True),
            )
        )
    selected = select_cluster(
        clusters.counts, [c.dispersion for c in cluster_poses], config.cluster_selection_rule
    )
    logger.debug("Ambiguous view: %d clusters, selected %d", len(cluster_poses), selected)
    return InferenceResult(
        pose=cluster_poses[selected].pose,
        depth=cluster_poses[selected].depth,
        ambiguity=ambiguity,
        clusters=clusters,
        cluster_poses=cluster_poses,
        selected_cluster=selected,
        selection_rule=config.cluster_selection_rule,
        confidence_sigma=confidence,
    )


def _single_hypothesis(hyps: HypothesisSet, camera: PinholeCamera, bbox_center: tuple[float, float]) -> InferenceResult:
    # one head cannot express ambiguity; its prediction is the pose
    rotation = hyps.rotation_array()[0]
    depth = float(hyps.depths[0])
    return InferenceResult(
        pose=_pose(camera, bbox_center, rotation, depth),
        depth=depth,
        ambiguity=AmbiguityReport(singular_values=[0.0] * 4, ambiguous=False),
        confidence_sigma=0.0,
    )


def analyze_hypotheses(rotations: np.ndarray, config: Optional[InferenceConfig] = None, object_id: Optional[str] = None) -> AnalysisResult:
    config = config or InferenceConfig()
    rotations = _to_hemisphere(np.atleast_2d(as_unit_quaternion(rotations)))
    return AnalysisResult(
        ambiguity=analyze(rotations, config.pca_threshold, config.singular_index, config.axis_method),
        clusters=_cluster(rotations, config, object_id),
    )


def bingham_plots(
    rotations: np.ndarray,
    per_cluster: bool = False,
    bandwidth: float = np.pi / 4,
    config: Optional[BinghamConfig] = None,
) -> list[BinghamResult]:
    """Bingham fit and equatorial plot data for the whole set or for each mean-shift cluster."""
    rotations = _to_hemisphere(np.atleast_2d(as_unit_quaternion(rotations)))
    if not per_cluster:
        params = fit(rotations, config)
        return [BinghamResult(params=params, plot=project_equatorial(rotations, config=config))]

    clusters: ClusterSet = mean_shift(rotations, bandwidth)
    results = []
    for k in range(len(clusters.modes)):
        members = rotations[clusters.members(k)]
        results.append(
            BinghamResult(cluster=k, params=fit(members, config), plot=project_equatorial(members, config=config))
        )
    return results


def _floor_depths(hyps: HypothesisSet) -> HypothesisSet:
    depths = np.maximum(hyps.depth_array(), MIN_EVAL_DEPTH)
    return hyps.model_copy(update={"depths": depths.tolist()})


def _expected_modes(obj: ToyObject) -> Optional[int]:
    return len(obj.symmetry.elements) if isinstance(obj.symmetry, FiniteGroup) else None


def evaluate(
    model: RegressorModel,
    obj: ToyObject,
    samples: Sequence[ToySample],
    config: Optional[InferenceConfig] = None,
    calibrate: bool = False,
) -> EvalReport:
    """Run inference on every sample and score it against the ground truth."""
    if not samples:
        raise EmptyDatasetError("Cannot evaluate an empty dataset")
    config = (config or InferenceConfig()).model_copy()
    hypothesis_sets = predict(model, np.array([s.observation for s in samples], dtype=float))
    metadata: dict = {
        "object": obj.id,
        "m": model.m,
        "sigma_unit": "radians",
        "cluster_selection_rule": config.cluster_selection_rule,
        "singular_index": config.singular_index,
    }

    if model.m > 1 and calibrate:
        scores = [centered_singular_values(h.rotation_array())[config.singular_index - 1] for h in hypothesis_sets]
        config.pca_threshold = calibrate_threshold(scores, [s.ambiguous_gt for s in samples])
        metadata["threshold_calibrated"] = True
    elif model.m > 1 and model.m != CALIBRATION_HYPOTHESES:
        config.pca_threshold = scaled_threshold(config.pca_threshold, model.m)
        logger.info("Scaled ambiguity threshold to %.4f for M = %d", config.pca_threshold, model.m)
    metadata["pca_threshold"] = config.pca_threshold

    diameter = obj.diameter
    records = []
    for index, (sample, hyps) in enumerate(zip(samples, hypothesis_sets)):
        hyps = _floor_depths(hyps)
        if model.m > 1:
            result = infer(hyps, sample.intrinsics, sample.bbox_center, config, obj.id)
        else:
            result = _single_hypothesis(hyps, sample.intrinsics, sample.bbox_center)
        gt = _pose(sample.intrinsics, sample.bbox_center, as_unit_quaternion(sample.gt_rotation), sample.gt_depth)

        axis_dev = None
        axis = result.ambiguity.axis_array()
        if axis is not None and sample.gt_axis_camera is not None:
            axis_dev = axis_deviation(axis, sample.gt_axis_camera)
        add = add_error(obj.model_points, result.pose, gt)
        adi = adi_error(obj.model_points, result.pose, gt)
        records.append(
            EvalRecord(
                index=index,
                add_err=add,
                adi_err=adi,
                add_pass=add < PASS_FRACTION * diameter,
                adi_pass=adi < PASS_FRACTION * diameter,
                rot_err_deg=rotation_error_deg(result.pose, gt),
                trans_err_mm=translation_error_mm(result.pose, gt),
                sigma=result.confidence_sigma,
                ambiguous_pred=result.ambiguity.ambiguous,
                ambiguous_gt=sample.ambiguous_gt,
                axis_dev_deg=axis_dev,
                n_clusters=None if result.clusters is None else len(result.clusters.modes),
            )
        )
    return build_report(records, metadata, _expected_modes(obj))


def sweep_hypothesis_counts(
    obj: ToyObject,
    train_samples: Sequence[ToySample],
    test_samples: Sequence[ToySample],
    m_values: Sequence[int],
    spec: Optional[ModelSpec] = None,
    train_config: Optional[TrainConfig] = None,
    config: Optional[InferenceConfig] = None,
) -> list[SweepRow]:
    """Train and evaluate one model per hypothesis count."""
    spec = spec or ModelSpec()
    rows = []
    for m in m_values:
        model, _ = train(train_samples, spec.model_copy(update={"m": m}), train_config)
        report = evaluate(model, obj, test_samples, config)
        rows.append(SweepRow(m=m, aggregates=report.aggregates))
        logger.info("M = %d: ADI %.3f, ADD %.3f", m, report.aggregates.adi_acc, report.aggregates.add_acc)
    return rows
