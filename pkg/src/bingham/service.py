"""Bingham distributions on S^3: normalisation, maximum-likelihood fit, sampling, plotting.

The normalising constant is estimated by importance-weighted quadrature: scrambled Sobol
nodes are pushed through an angular central Gaussian whose shape follows the
concentrations, the same envelope the rejection sampler uses. The weights
exp(-x^T A x) (x^T Omega x)^2 are bounded, so the estimate stays accurate for strongly
concentrated densities where uniform nodes would miss the mass.
"""
import csv
import functools
import io
import logging
import warnings
from typing import Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import brentq
from scipy.special import logsumexp, ndtri
from scipy.stats import qmc

from src.bingham.domain import BinghamConfig, BinghamParams, DensityGrid, PlotDataset
from src.errors import (
    InsufficientSamplesError,
    InvalidConcentrationError,
    SaturationWarning,
)
from src.rotation.service import _to_hemisphere, as_unit_quaternion

logger = logging.getLogger(__name__)

SPHERE_AREA = 2.0 * np.pi**2
LOG_SPHERE_AREA = float(np.log(SPHERE_AREA))
MIN_FIT_SAMPLES = 5
RANK_TOLERANCE = 1e-12


@functools.lru_cache(maxsize=8)
def _quadrature_normals(n_nodes: int, seed: int) -> np.ndarray:
    exponent = int(np.ceil(np.log2(n_nodes)))
    nodes = qmc.Sobol(d=4, scramble=True, seed=seed).random_base2(exponent)
    normals = ndtri(np.clip(nodes, 1e-12, 1.0 - 1e-12))
    normals.setflags(write=False)
    return normals


def _full_concentrations(concentrations: ArrayLike) -> np.ndarray:
    z = np.asarray(concentrations, dtype=float).ravel()
    if z.size == 3:
        z = np.append(z, 0.0)
    if z.size != 4:
        raise InvalidConcentrationError(f"Expected 3 or 4 concentrations, got {z.size}")
    if np.any(z > 0.0):
        raise InvalidConcentrationError(f"Concentrations must be non-positive, got {z.tolist()}")
    return z


def _envelope_b(a: np.ndarray) -> float:
    """Root of sum_i 1 / (b + 2 a_i) = 1 for a >= 0 with min(a) = 0."""
    def excess(b: float) -> float:
        return float(np.sum(1.0 / (b + 2.0 * a)) - 1.0)

    if excess(4.0) >= 0.0:
        return 4.0
    return brentq(excess, 1.0, 4.0, xtol=1e-14)


def _weighted_nodes(z: np.ndarray, config: BinghamConfig) -> tuple[np.ndarray, np.ndarray, float]:
    """Quadrature nodes on S^3, their log importance weights and -0.5 log|Omega|."""
    a = -z
    b = _envelope_b(a)
    omega = 1.0 + 2.0 * a / b
    y = _quadrature_normals(config.quadrature_nodes, config.quadrature_seed) / np.sqrt(omega)
    x = y / np.linalg.norm(y, axis=1, keepdims=True)
    squares = x * x
    log_weights = -squares @ a + 2.0 * np.log(squares @ omega)
    return squares, log_weights, -0.5 * float(np.sum(np.log(omega)))


def log_norm_constant(concentrations: ArrayLike, config: Optional[BinghamConfig] = None) -> float:
    """log of the integral over S^3 of exp(sum_j z_j q_j^2)."""
    config = config or BinghamConfig()
    z = _full_concentrations(concentrations)
    shift = float(np.max(z))
    _, log_weights, log_det_term = _weighted_nodes(z - shift, config)
    return shift + LOG_SPHERE_AREA + log_det_term + float(logsumexp(log_weights) - np.log(len(log_weights)))


def second_moments(concentrations: ArrayLike, config: Optional[BinghamConfig] = None) -> np.ndarray:
    """E[q_j^2] under the density with diagonal concentrations; the gradient of log_norm."""
    config = config or BinghamConfig()
    z = _full_concentrations(concentrations)
    squares, log_weights, _ = _weighted_nodes(z - np.max(z), config)
    weights = np.exp(log_weights - logsumexp(log_weights))
    return weights @ squares


def _orient_columns(vectors: np.ndarray) -> np.ndarray:
    pivots = vectors[np.argmax(np.abs(vectors), axis=0), np.arange(vectors.shape[1])]
    return vectors * np.where(pivots < 0.0, -1.0, 1.0)


def fit(quats: ArrayLike, config: Optional[BinghamConfig] = None) -> BinghamParams:
    """Maximum-likelihood Bingham distribution of a quaternion sample.

    The orientation comes from the eigenvectors of the scatter matrix; each concentration
    is found by a bracketed root find matching the model second moment to the matching
    scatter eigenvalue, sweeping the three coordinates until all match.
    """
    config = config or BinghamConfig()
    batch = np.atleast_2d(as_unit_quaternion(quats))
    if len(batch) < MIN_FIT_SAMPLES:
        raise InsufficientSamplesError(
            f"Bingham fit needs at least {MIN_FIT_SAMPLES} samples, got {len(batch)}"
        )

    scatter = batch.T @ batch / len(batch)
    eigenvalues, eigenvectors = np.linalg.eigh(scatter)
    eigenvectors = _orient_columns(eigenvectors)
    targets = eigenvalues[:3]
    floor = config.concentration_floor

    concentrations = np.zeros(3)
    saturated = np.zeros(3, dtype=bool)
    for sweep in range(1, config.max_sweeps + 1):
        for j in range(3):
            if targets[j] < RANK_TOLERANCE:
                concentrations[j] = floor
                saturated[j] = True
                continue

            def mismatch(value: float, j: int = j) -> float:
                trial = concentrations.copy()
                trial[j] = value
                return float(second_moments(trial, config)[j] - targets[j])

            if mismatch(0.0) <= 0.0:
                concentrations[j] = 0.0
                saturated[j] = False
            elif mismatch(floor) >= 0.0:
                concentrations[j] = floor
                saturated[j] = True
            else:
                concentrations[j] = brentq(mismatch, floor, 0.0, xtol=1e-10, rtol=1e-12)
                saturated[j] = False

        moments = second_moments(concentrations, config)[:3]
        free = ~saturated & (concentrations < 0.0)
        residual = float(np.max(np.abs(moments[free] / targets[free] - 1.0))) if np.any(free) else 0.0
        logger.debug("Bingham sweep %d: concentrations %s, residual %.2e", sweep, concentrations, residual)
        if residual < config.tolerance:
            break

    order = np.argsort(concentrations, kind="stable")
    concentrations = concentrations[order]
    orientation = eigenvectors.copy()
    orientation[:, :3] = eigenvectors[:, :3][:, order]
    if saturated.any():
        logger.warning("Bingham fit saturated at concentration %.0f", floor)
        warnings.warn(
            f"Scatter matrix is rank deficient; concentrations capped at {floor}",
            SaturationWarning,
            stacklevel=2,
        )

    full = np.append(concentrations, 0.0)
    return BinghamParams(
        orientation=orientation.tolist(),
        concentrations=full.tolist(),
        log_norm=log_norm_constant(full, config),
        saturated=bool(saturated.any()),
    )


def log_density(params: BinghamParams, q: ArrayLike) -> np.ndarray:
    q = as_unit_quaternion(q)
    projected = q @ params.orientation_matrix()
    return (projected * projected) @ params.concentration_array() - params.log_norm


def sample(params: BinghamParams, n: int, seed: int = 0) -> np.ndarray:
    """Rejection sampling with an angular central Gaussian envelope; hemisphere output."""
    if n <= 0:
        raise InsufficientSamplesError(f"Sample count must be positive, got {n}")
    rng = np.random.default_rng(seed)
    a = -params.concentration_array()
    b = _envelope_b(a)
    omega = 1.0 + 2.0 * a / b
    log_bound = -(4.0 - b) / 2.0 + 2.0 * np.log(4.0 / b)

    accepted = []
    total = 0
    while total < n:
        draws = max(2 * (n - total), 64)
        y = rng.standard_normal((draws, 4)) / np.sqrt(omega)
        x = y / np.linalg.norm(y, axis=1, keepdims=True)
        squares = x * x
        log_ratio = -squares @ a + 2.0 * np.log(squares @ omega) - log_bound
        keep = np.log(rng.random(draws)) < log_ratio
        accepted.append(x[keep])
        total += int(np.count_nonzero(keep))
    local = np.concatenate(accepted)[:n]
    return _to_hemisphere(local @ params.orientation_matrix().T)


def project_equatorial(
    source: Union[BinghamParams, ArrayLike],
    n_points: int = 500,
    seed: int = 0,
    resolution: int = 32,
    config: Optional[BinghamConfig] = None,
) -> PlotDataset:
    """Project quaternions onto S^2 by dropping the least-scatter direction.

    The three remaining orientation columns span the plotting space. Dropping the most
    concentrated column rather than the mode keeps the mode itself at the north pole
    (0, 0, 1) and leaves the two widest dispersion directions on the plot. A ring of
    rotations maps onto a great circle.
    """
    if isinstance(source, BinghamParams):
        params = source
        quats = sample(params, n_points, seed)
    else:
        quats = np.atleast_2d(as_unit_quaternion(source))
        params = fit(quats, config)

    basis = params.orientation_matrix()[:, 1:]
    projected = quats @ basis
    norms = np.linalg.norm(projected, axis=1, keepdims=True)
    north = np.array([0.0, 0.0, 1.0])
    points = np.where(norms > 1e-12, projected / np.where(norms > 1e-12, norms, 1.0), north)

    polar = np.pi * (np.arange(resolution) + 0.5) / resolution
    azimuth = 2.0 * np.pi * (np.arange(2 * resolution) + 0.5) / (2 * resolution)
    theta, phi = np.meshgrid(polar, azimuth, indexing="ij")
    sphere = np.stack(
        [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1
    ).reshape(-1, 3)
    lifted = sphere @ basis.T
    density = np.exp(log_density(params, lifted))

    return PlotDataset(
        mode=params.mode().tolist(),
        points=points.tolist(),
        grid=DensityGrid(res=resolution, values=density.tolist()),
    )


def plot_points_csv(
    datasets: Union[PlotDataset, Sequence[PlotDataset]],
    clusters: Optional[Sequence[Optional[int]]] = None,
) -> str:
    """Point rows of one or more plot datasets, led by a cluster column when labels are given."""
    if isinstance(datasets, PlotDataset):
        datasets = [datasets]
    if clusters is not None and len(clusters) != len(datasets):
        raise ValueError(f"Got {len(clusters)} cluster labels for {len(datasets)} plot datasets")

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    if clusters is None:
        writer.writerow(["x", "y", "z"])
        for dataset in datasets:
            writer.writerows(dataset.points)
    else:
        writer.writerow(["cluster", "x", "y", "z"])
        for cluster, dataset in zip(clusters, datasets):
            label = "" if cluster is None else cluster
            writer.writerows([label, *point] for point in dataset.points)
    return buffer.getvalue()
