"""Robust averaging and clustering of rotations on the quaternion hypersphere."""
import logging
import warnings
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike

from src.errors import (
    ConfigError,
    ConvergenceWarning,
    EmptyInputError,
    InvalidBandwidthError,
    WideSpreadWarning,
)
from src.rotation.service import (
    _exp_map,
    _log_map,
    _to_hemisphere,
    as_unit_quaternion,
)
from src.stats.domain import AveragingResult, ClusterSet, DispersionStats

logger = logging.getLogger(__name__)

# distance below which an iterate counts as sitting on a data point
SINGULARITY_DISTANCE = 1e-9
KARCHER_SPREAD_LIMIT = np.pi / 4
MAX_STEP_HALVINGS = 30


def _as_batch(quats: ArrayLike) -> np.ndarray:
    quats = np.asarray(quats, dtype=float)
    if quats.size == 0:
        raise EmptyInputError("Cannot average an empty list of quaternions")
    return _to_hemisphere(np.atleast_2d(as_unit_quaternion(quats)))


def _geodesic_distances(x: np.ndarray, quats: np.ndarray) -> np.ndarray:
    return np.linalg.norm(_log_map(x, quats), axis=-1)


def chordal_mean(quats: ArrayLike) -> np.ndarray:
    """Principal eigenvector of the scatter matrix: the sign-invariant chordal L2 mean."""
    batch = _as_batch(quats)
    _, eigenvectors = np.linalg.eigh(batch.T @ batch)
    return _to_hemisphere(eigenvectors[:, -1])


def _vertex_optimum(batch: np.ndarray, index: int) -> Optional[float]:
    """Objective at batch[index] when that data point satisfies the median optimality condition."""
    tangents = _log_map(batch[index], batch)
    distances = np.linalg.norm(tangents, axis=1)
    coincident = distances < SINGULARITY_DISTANCE
    far = ~coincident
    pull = np.sum(tangents[far] / distances[far, None], axis=0)
    if np.linalg.norm(pull) > np.count_nonzero(coincident):
        return None
    return float(np.sum(distances))


def weiszfeld(quats: ArrayLike, tol: float = 1e-9, max_iter: int = 1000) -> AveragingResult:
    """Geodesic L1 median by tangent-space Weiszfeld iterations.

    Iterates that land on data points use the Vardi-Zhang modification: the coincident
    points leave the weighted average and the step shrinks by their multiplicity. A step
    that would increase the objective is halved until it does not, so the sum of
    distances never increases between iterates.
    """
    batch = _as_batch(quats)
    if len(batch) == 1:
        return AveragingResult(batch[0].copy(), 0, True, [0.0])

    x = chordal_mean(batch)
    objective = float(np.sum(_geodesic_distances(x, batch)))
    history = [objective]
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        tangents = _log_map(x, batch)
        distances = np.linalg.norm(tangents, axis=1)
        coincident = distances < SINGULARITY_DISTANCE
        far = ~coincident
        if not np.any(far):
            converged = True
            break

        # iterates crawl sublinearly towards a data point that is itself the median
        nearest = int(np.argmin(distances))
        if not coincident[nearest]:
            vertex_objective = _vertex_optimum(batch, nearest)
            if vertex_objective is not None and vertex_objective <= objective:
                x = batch[nearest].copy()
                objective = vertex_objective
                history.append(objective)
                converged = True
                break

        weights = 1.0 / distances[far]
        pull = np.sum(weights[:, None] * tangents[far], axis=0)
        step = pull / np.sum(weights)
        multiplicity = int(np.count_nonzero(coincident))
        if multiplicity:
            pull_norm = float(np.linalg.norm(pull))
            if pull_norm <= multiplicity:
                converged = True
                break
            step = step * (1.0 - multiplicity / pull_norm)

        candidate = _exp_map(x, step)
        candidate_objective = float(np.sum(_geodesic_distances(candidate, batch)))
        halvings = 0
        while candidate_objective > objective and halvings < MAX_STEP_HALVINGS:
            step = 0.5 * step
            candidate = _exp_map(x, step)
            candidate_objective = float(np.sum(_geodesic_distances(candidate, batch)))
            halvings += 1
        if candidate_objective > objective:
            # no descent direction left at floating point resolution
            converged = True
            break

        x = candidate
        objective = candidate_objective
        history.append(objective)
        if np.linalg.norm(step) < tol:
            converged = True
            break

    if not converged:
        logger.warning("Weiszfeld did not converge in %d iterations", max_iter)
        warnings.warn(
            f"Weiszfeld median did not converge in {max_iter} iterations",
            ConvergenceWarning,
            stacklevel=2,
        )
    logger.debug("Weiszfeld finished after %d iterations (converged=%s)", iteration, converged)
    return AveragingResult(x, iteration, converged, history)


def weiszfeld_median(quats: ArrayLike, tol: float = 1e-9, max_iter: int = 1000) -> np.ndarray:
    return weiszfeld(quats, tol, max_iter).quaternion


def _karcher(batch: np.ndarray, tol: float, max_iter: int) -> AveragingResult:
    x = chordal_mean(batch)
    spread = float(np.max(_geodesic_distances(x, batch)))
    if spread >= KARCHER_SPREAD_LIMIT:
        logger.warning("Karcher mean input spreads %.3f rad from its chordal mean", spread)
        warnings.warn(
            f"Inputs spread {spread:.3f} rad from their chordal mean; the Karcher mean may not be unique",
            WideSpreadWarning,
            stacklevel=3,
        )

    converged = False
    iteration = 0
    for iteration in range(max_iter + 1):
        gradient = np.mean(_log_map(x, batch), axis=0)
        if np.linalg.norm(gradient) < tol:
            converged = True
            break
        if iteration == max_iter:
            break
        x = _exp_map(x, gradient)

    if not converged:
        warnings.warn(
            f"Karcher mean did not converge in {max_iter} iterations",
            ConvergenceWarning,
            stacklevel=3,
        )
    return AveragingResult(x, iteration, converged)


def karcher_mean(quats: ArrayLike, tol: float = 1e-10, max_iter: int = 100) -> np.ndarray:
    """Minimiser of the sum of squared geodesic distances, by iterated tangent-space averaging."""
    return _karcher(_as_batch(quats), tol, max_iter).quaternion


def dispersion(quats: ArrayLike, tol: float = 1e-10, max_iter: int = 100) -> DispersionStats:
    """Root-mean-square geodesic deviation from the Karcher mean, in radians."""
    batch = _as_batch(quats)
    mean = _karcher(batch, tol, max_iter).quaternion
    distances = _geodesic_distances(mean, batch)
    sigma = float(np.sqrt(np.mean(distances * distances)))
    return DispersionStats(karcher_mean=mean.tolist(), sigma=sigma)


def _seek_mode(
    seed: np.ndarray,
    batch: np.ndarray,
    radius: float,
    max_iter: int,
    weiszfeld_tol: float,
    weiszfeld_max_iter: int,
    cache: dict,
) -> np.ndarray:
    x = seed
    for _ in range(max_iter):
        window = _geodesic_distances(x, batch) <= radius
        if not np.any(window):
            break
        key = window.tobytes()
        if key not in cache:
            cache[key] = weiszfeld(batch[window], weiszfeld_tol, weiszfeld_max_iter).quaternion
        shifted = cache[key]
        shift = float(_geodesic_distances(x, shifted[None, :])[0])
        x = shifted
        if shift < radius / 50.0:
            break
    return x


def mean_shift(
    quats: ArrayLike,
    bandwidth: float,
    max_iter: int = 100,
    weiszfeld_tol: float = 1e-7,
    weiszfeld_max_iter: int = 1000,
    min_support: int = 1,
) -> ClusterSet:
    """Flat-kernel mean shift under the quaternion distance, seeded at every point.

    The bandwidth is the bin diameter: each window holds the points within bandwidth/2 of
    the current estimate and is summarised by its Weiszfeld median, so a seed never reaches
    a bundle a full bandwidth away. Converged modes are visited by decreasing support
    (ties: seed order) and kept when at least bandwidth/2 away from every mode kept so far.
    Points join their nearest surviving mode; modes left with fewer than min_support
    members are dropped and their points reassigned, always keeping the best supported one.
    """
    if bandwidth <= 0:
        raise InvalidBandwidthError(f"Mean shift bandwidth must be positive, got {bandwidth}")
    if min_support < 1:
        raise ConfigError(f"min_support must be at least 1, got {min_support}")
    batch = _as_batch(quats)
    radius = bandwidth / 2.0
    cache: dict = {}

    modes = []
    supports = []
    for seed in batch:
        mode = _seek_mode(seed, batch, radius, max_iter, weiszfeld_tol, weiszfeld_max_iter, cache)
        modes.append(mode)
        supports.append(int(np.count_nonzero(_geodesic_distances(mode, batch) <= radius)))

    order = sorted(range(len(modes)), key=lambda i: (-supports[i], i))
    kept: list[np.ndarray] = []
    for i in order:
        if all(_geodesic_distances(k, modes[i][None, :])[0] >= radius for k in kept):
            kept.append(modes[i])
    centers = np.array(kept)

    while True:
        distances = np.arccos(np.clip(np.abs(batch @ centers.T), 0.0, 1.0))
        assignments = np.argmin(distances, axis=1)
        counts = np.bincount(assignments, minlength=len(centers))
        keep = counts >= min_support
        if not np.any(keep):
            keep = np.arange(len(counts)) == np.argmax(counts)
        if np.all(keep) and np.all(counts > 0):
            break
        centers = centers[keep & (counts > 0)]

    logger.debug("Mean shift found %d modes among %d points", len(centers), len(batch))
    return ClusterSet(
        modes=centers.tolist(),
        assignments=assignments.tolist(),
        counts=counts.tolist(),
    )


def median_scalar(values: Sequence[float]) -> float:
    """Lower median: the element at index (n - 1) // 2 of the sorted values."""
    ordered = np.sort(np.asarray(values, dtype=float).ravel())
    if ordered.size == 0:
        raise EmptyInputError("Cannot take the median of an empty list")
    return float(ordered[(ordered.size - 1) // 2])
