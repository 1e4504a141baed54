import logging
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike

from src.ambiguity.domain import (
    CALIBRATION_HYPOTHESES,
    DEFAULT_THRESHOLD,
    DEGENERATE_RATIO,
    RELATIVE_SPREAD_RATIO,
    AmbiguityReport,
    AxisMethod,
)
from src.errors import ConfigError, InsufficientAxesError, InsufficientHypothesesError
from src.rotation.domain import AXIS_EPSILON
from src.rotation.service import _conjugate, _multiply, _to_hemisphere, as_unit_quaternion, rotation_axes

logger = logging.getLogger(__name__)


def _hypothesis_matrix(quats: ArrayLike, minimum: int) -> np.ndarray:
    batch = np.atleast_2d(as_unit_quaternion(quats))
    if len(batch) < minimum:
        raise InsufficientHypothesesError(
            f"Need at least {minimum} hypotheses, got {len(batch)}"
        )
    return _to_hemisphere(batch)


def centered_singular_values(quats: ArrayLike) -> np.ndarray:
    """Descending singular values of the column-centred M x 4 hypothesis matrix."""
    batch = _hypothesis_matrix(quats, 2)
    centered = batch - batch.mean(axis=0)
    values = np.linalg.svd(centered, compute_uv=False)
    return np.pad(values, (0, 4 - len(values)))


def detect_ambiguity(
    quats: ArrayLike,
    threshold: float = DEFAULT_THRESHOLD,
    singular_index: int = 2,
) -> tuple[bool, np.ndarray]:
    if singular_index not in (1, 2):
        raise ConfigError(f"singular_index must be 1 or 2, got {singular_index}")
    values = centered_singular_values(quats)
    return bool(values[singular_index - 1] > threshold), values


def scaled_threshold(threshold: float, m: int) -> float:
    """Carry a threshold calibrated at 30 hypotheses over to m hypotheses (sqrt(M) growth)."""
    return threshold * float(np.sqrt(m / CALIBRATION_HYPOTHESES))


def _plane_axis(batch: np.ndarray) -> tuple[np.ndarray, float, bool]:
    axes, usable = rotation_axes(batch)
    stacked = axes[usable]
    if len(stacked) < 3:
        raise InsufficientAxesError(f"Need at least 3 usable rotation axes, got {len(stacked)}")
    _, values, right = np.linalg.svd(stacked, full_matrices=False)
    return right[-1], float(values[-1]), bool(values[1] < DEGENERATE_RATIO * values[0])


def _relative_axis(batch: np.ndarray) -> tuple[np.ndarray, float, bool]:
    # q_i q_j^* of two members p Rz(a), p Rz(b) of a symmetry family rotates about R_p z
    first, second = np.triu_indices(len(batch), 1)
    relative = _to_hemisphere(_multiply(batch[first], _conjugate(batch[second])))
    vectors = relative[:, 1:]
    _, values, right = np.linalg.svd(vectors, full_matrices=False)
    if values[0] <= AXIS_EPSILON:
        raise InsufficientAxesError("All hypotheses coincide; relative rotations carry no axis")
    residual = float(np.sqrt(np.sum(values[1:] ** 2)))
    return right[0], residual, bool(len(values) > 1 and values[1] > RELATIVE_SPREAD_RATIO * values[0])


def estimate_axis(quats: ArrayLike, method: AxisMethod = "plane") -> tuple[np.ndarray, float, bool]:
    """Ambiguity axis of a hypothesis set, as (axis, residual, degenerate).

    "plane" returns the unit s minimising ||A^T s||_2 over the stacked hypothesis rotation
    axes; degenerate flags a two-dimensional null space, which happens when the axes are
    nearly collinear. "relative" returns the dominant direction of the pairwise relative
    rotations q_i q_j^*, weighted by sin of their half angles; degenerate flags pairs that
    disagree on the direction.
    """
    if method not in ("plane", "relative"):
        raise ConfigError(f"Unknown axis method {method!r}")
    batch = _to_hemisphere(np.atleast_2d(as_unit_quaternion(quats)))
    axis, residual, degenerate = _plane_axis(batch) if method == "plane" else _relative_axis(batch)
    axis = axis if axis[np.argmax(np.abs(axis))] > 0 else -axis
    return axis, residual, degenerate


def axis_deviation(estimated: ArrayLike, ground_truth: ArrayLike) -> float:
    """Angle in degrees between two undirected axes, in [0, 90]."""
    a = np.asarray(estimated, dtype=float)
    b = np.asarray(ground_truth, dtype=float)
    cosine = abs(float(np.dot(a, b))) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.degrees(np.arccos(min(cosine, 1.0))))


def analyze(
    quats: ArrayLike,
    threshold: float = DEFAULT_THRESHOLD,
    singular_index: int = 2,
    axis_method: AxisMethod = "plane",
) -> AmbiguityReport:
    ambiguous, values = detect_ambiguity(quats, threshold, singular_index)
    axis = None
    residual = 0.0
    degenerate = False
    if ambiguous:
        try:
            axis, residual, degenerate = estimate_axis(quats, axis_method)
        except InsufficientAxesError:
            degenerate = True
    return AmbiguityReport(
        singular_values=values.tolist(),
        ambiguous=ambiguous,
        axis=None if axis is None or degenerate else axis.tolist(),
        axis_residual=residual,
        degenerate_axis=degenerate,
        threshold=threshold,
        singular_index=singular_index,
        axis_method=axis_method,
    )


def calibrate_threshold(scores: Sequence[float], labels: Sequence[bool]) -> float:
    """Threshold on the singular value maximising balanced accuracy on labelled views."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    if labels.all() or not labels.any():
        logger.warning("Calibration needs both ambiguous and unambiguous views; keeping %.3f", DEFAULT_THRESHOLD)
        return DEFAULT_THRESHOLD

    unique = np.unique(scores)
    candidates = np.concatenate([[unique[0] - 1.0], 0.5 * (unique[1:] + unique[:-1])])
    best_threshold = DEFAULT_THRESHOLD
    best_accuracy = -1.0
    for candidate in candidates:
        predicted = scores > candidate
        accuracy = 0.5 * (np.mean(predicted[labels]) + np.mean(~predicted[~labels]))
        if accuracy > best_accuracy:
            best_threshold, best_accuracy = float(candidate), float(accuracy)
    logger.info("Calibrated ambiguity threshold %.4f (balanced accuracy %.3f)", best_threshold, best_accuracy)
    return best_threshold
