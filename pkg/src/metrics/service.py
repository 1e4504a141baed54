"""Pose-quality and ambiguity-quality metrics."""
import csv
import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy.spatial.distance import cdist

from src.errors import EmptyInputError, EmptyPointSetError
from src.metrics.domain import (
    CONFIDENCE_THRESHOLDS,
    PASS_FRACTION,
    ConfidenceRow,
    EvalAggregates,
    EvalRecord,
    EvalReport,
    PoseEstimate,
)
from src.rotation.service import _to_matrix, rotation_loss

logger = logging.getLogger(__name__)


def _transform(points: np.ndarray, pose: PoseEstimate) -> np.ndarray:
    return points @ _to_matrix(pose.rotation_array()).T + pose.translation_array()


def _model_points(points: ArrayLike) -> np.ndarray:
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(points) == 0:
        raise EmptyPointSetError("Model point set is empty")
    return points


def add_error(points: ArrayLike, est: PoseEstimate, gt: PoseEstimate) -> float:
    """Mean distance between corresponding model points, in meters."""
    points = _model_points(points)
    return float(np.mean(np.linalg.norm(_transform(points, est) - _transform(points, gt), axis=1)))


def add_pass(points: ArrayLike, est: PoseEstimate, gt: PoseEstimate, diameter: float) -> bool:
    return add_error(points, est, gt) < PASS_FRACTION * diameter


def adi_error(points: ArrayLike, est: PoseEstimate, gt: PoseEstimate) -> float:
    """Mean distance from each gt-posed model point to the closest est-posed one."""
    points = _model_points(points)
    distances = cdist(_transform(points, gt), _transform(points, est))
    return float(np.mean(distances.min(axis=1)))


def adi_pass(points: ArrayLike, est: PoseEstimate, gt: PoseEstimate, diameter: float) -> bool:
    return adi_error(points, est, gt) < PASS_FRACTION * diameter


def rotation_error_deg(est: PoseEstimate, gt: PoseEstimate) -> float:
    return float(np.degrees(rotation_loss(est.rotation, gt.rotation)))


def translation_error_mm(est: PoseEstimate, gt: PoseEstimate) -> float:
    return 1000.0 * float(np.linalg.norm(est.translation_array() - gt.translation_array()))


def _mean(values: list[float]) -> Optional[float]:
    return float(np.mean(values)) if values else None


def ambiguity_scores(records: Sequence[EvalRecord]) -> tuple[Optional[float], Optional[float], Optional[float]]:
    """(accuracy on unambiguous views, accuracy on ambiguous views, mean axis deviation).

    A field is None when its stratum is empty; the axis deviation averages over
    ambiguous views that were detected as ambiguous.
    """
    if not records:
        raise EmptyInputError("No evaluation records")
    unambiguous = [not r.ambiguous_pred for r in records if not r.ambiguous_gt]
    ambiguous = [r.ambiguous_pred for r in records if r.ambiguous_gt]
    deviations = [
        r.axis_dev_deg for r in records if r.ambiguous_gt and r.ambiguous_pred and r.axis_dev_deg is not None
    ]
    return _mean(unambiguous), _mean(ambiguous), _mean(deviations)


def aggregate(records: Sequence[EvalRecord], expected_modes: Optional[int] = None) -> EvalAggregates:
    if not records:
        raise EmptyInputError("No evaluation records")
    acc_unambiguous, acc_ambiguous, axis_dev = ambiguity_scores(records)

    mode_recovery = None
    if expected_modes is not None:
        counted = [r.n_clusters == expected_modes for r in records if r.ambiguous_gt and r.n_clusters is not None]
        mode_recovery = _mean(counted)

    return EvalAggregates(
        n=len(records),
        add_acc=float(np.mean([r.add_pass for r in records])),
        adi_acc=float(np.mean([r.adi_pass for r in records])),
        mean_rot_err_deg=float(np.mean([r.rot_err_deg for r in records])),
        mean_trans_err_mm=float(np.mean([r.trans_err_mm for r in records])),
        acc_unambiguous=acc_unambiguous,
        acc_ambiguous=acc_ambiguous,
        mean_axis_dev_deg=axis_dev,
        expected_modes=expected_modes,
        mode_recovery=mode_recovery,
    )


def confidence_table(
    records: Sequence[EvalRecord],
    thresholds: Sequence[Optional[float]] = CONFIDENCE_THRESHOLDS,
) -> list[ConfidenceRow]:
    """Errors over unambiguous views whose dispersion falls below each threshold."""
    pool = [r for r in records if not r.ambiguous_gt]
    rows = []
    for threshold in thresholds:
        kept = [r for r in pool if threshold is None or r.sigma < threshold]
        reject = 100.0 * (1.0 - len(kept) / len(pool)) if pool else 0.0
        rows.append(
            ConfidenceRow(
                threshold=threshold,
                retained=len(kept),
                reject_pct=reject,
                mean_rot_err_deg=_mean([r.rot_err_deg for r in kept]),
                mean_trans_err_mm=_mean([r.trans_err_mm for r in kept]),
                add_acc=_mean([r.add_pass for r in kept]),
                adi_acc=_mean([r.adi_pass for r in kept]),
            )
        )
    return rows


def build_report(
    records: Sequence[EvalRecord],
    metadata: Optional[dict] = None,
    expected_modes: Optional[int] = None,
) -> EvalReport:
    report = EvalReport(
        aggregates=aggregate(records, expected_modes),
        confidence_table=confidence_table(records),
        records=list(records),
        metadata=dict(metadata or {}),
    )
    logger.info(
        "Evaluated %d views: ADD %.3f, ADI %.3f", report.aggregates.n, report.aggregates.add_acc, report.aggregates.adi_acc
    )
    return report


def csv_path(path: Union[str, Path]) -> Path:
    return Path(path).with_suffix(".csv")


def write_report(report: EvalReport, path: Union[str, Path]) -> tuple[Path, Path]:
    """JSON report at `path` and one CSV row per record next to it."""
    path = Path(path)
    path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    table = csv_path(path)
    with table.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(EvalRecord.model_fields), lineterminator="\n")
        writer.writeheader()
        for record in report.records:
            writer.writerow(record.model_dump())
    return path, table
