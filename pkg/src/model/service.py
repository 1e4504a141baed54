"""Multi-hypothesis pose regressor: forward pass, relaxed winner-take-all loss, backprop, training."""
import logging
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike

from src.errors import (
    EmptyDatasetError,
    InvalidRelaxationError,
    NoActiveHypothesesError,
    TrainingDivergedError,
    WidthMismatchError,
)
from src.model.domain import (
    HEAD_WIDTH,
    EpochRecord,
    HypothesisSet,
    ModelSpec,
    RegressorModel,
    TrainConfig,
    TrainingLog,
)
from src.rotation.domain import IDENTITY
from src.rotation.service import _to_hemisphere, as_unit_quaternion, rotation_loss, rotation_loss_gradient
from src.toy.domain import ToySample

logger = logging.getLogger(__name__)

# raw rotation outputs shorter than this fall back to the identity
RAW_NORM_EPSILON = 1e-12


def smooth_l1(x: ArrayLike) -> np.ndarray:
    x = np.abs(np.asarray(x, dtype=float))
    return np.where(x <= 1.0, 0.5 * x * x, x - 0.5)


def pose_loss(
    hyp: tuple[ArrayLike, float],
    gt: tuple[ArrayLike, float],
    lambda_depth: float = 3.0,
) -> float:
    (q, d), (q_gt, d_gt) = hyp, gt
    return float(rotation_loss(q, q_gt) + lambda_depth * smooth_l1(d - d_gt))


def meta_loss_weights(m_active: int, epsilon: float) -> tuple[float, float]:
    """Per-hypothesis loss weights (winner, every other active head)."""
    _check_relaxation(epsilon, m_active)
    if m_active == 1:
        return 1.0, 0.0
    return 1.0 - epsilon, epsilon / (m_active - 1)


def _check_relaxation(epsilon: float, m_active: int) -> None:
    if m_active < 1:
        raise NoActiveHypothesesError("At least one hypothesis must be active")
    if epsilon < 0.0 or (m_active > 1 and epsilon >= (m_active - 1) / m_active):
        raise InvalidRelaxationError(
            f"Relaxation must satisfy 0 <= epsilon < (M-1)/M for M = {m_active}, got {epsilon}"
        )


def _relaxed_weights(losses: np.ndarray, active: np.ndarray, epsilon: float) -> tuple[np.ndarray, np.ndarray]:
    """Batched weights (B, M) of the relaxed minimum and the winner of each row."""
    m_active = active.sum(axis=1)
    if np.any(m_active == 0):
        raise NoActiveHypothesesError("Every hypothesis of a sample is masked out")
    for count in np.unique(m_active):
        _check_relaxation(epsilon, int(count))

    # argmin returns the first index on ties
    winners = np.argmin(np.where(active, losses, np.inf), axis=1)
    multi = m_active > 1
    others = np.where(multi, epsilon / np.maximum(m_active - 1, 1), 0.0)
    weights = np.where(active, others[:, None], 0.0)
    weights[np.arange(len(losses)), winners] = np.where(multi, 1.0 - epsilon, 1.0)
    return weights, winners


def meta_loss(
    hyps: HypothesisSet,
    gt: tuple[ArrayLike, float],
    epsilon: float = 0.0,
    lambda_depth: float = 3.0,
    active_mask: Optional[ArrayLike] = None,
) -> tuple[float, int]:
    """Relaxed minimum of the per-hypothesis pose losses over the active heads.

    The winner carries weight 1 - epsilon and every other active head epsilon / (M - 1),
    M counting active heads only. With epsilon = 0 this is the plain minimum.
    """
    q_gt, d_gt = gt
    losses = rotation_loss(hyps.rotation_array(), q_gt) + lambda_depth * smooth_l1(hyps.depth_array() - d_gt)
    active = np.ones(hyps.m, dtype=bool) if active_mask is None else np.asarray(active_mask, dtype=bool)
    weights, winners = _relaxed_weights(losses[None, :], active[None, :], epsilon)
    return float(np.sum(weights[0] * np.where(active, losses, 0.0))), int(winners[0])


def init_model(spec: ModelSpec) -> RegressorModel:
    """He-initialised weights and zero biases, seeded by the spec."""
    rng = np.random.default_rng(spec.seed)
    sizes = spec.layer_sizes
    weights = [rng.normal(0.0, np.sqrt(2.0 / n_in), (n_out, n_in)) for n_in, n_out in zip(sizes, sizes[1:])]
    biases = [np.zeros(n_out) for n_out in sizes[1:]]
    return RegressorModel(spec, weights, biases)


def _check_width(model: RegressorModel, observations: np.ndarray) -> None:
    if observations.shape[-1] != model.spec.input_width:
        raise WidthMismatchError(
            f"Model expects observations of width {model.spec.input_width}, got {observations.shape[-1]}"
        )


def _forward_cache(model: RegressorModel, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
    slope = model.spec.leaky_slope
    activations, pre_activations = [x], []
    h = x
    for weight, bias in zip(model.weights[:-1], model.biases[:-1]):
        z = h @ weight.T + bias
        pre_activations.append(z)
        h = np.where(z > 0.0, z, slope * z)
        activations.append(h)
    out = h @ model.weights[-1].T + model.biases[-1]
    return out, activations, pre_activations


def _decode(out: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Unit rotations (before hemisphere mapping), raw norms, validity mask and depths."""
    heads = out.reshape(len(out), m, HEAD_WIDTH)
    raw, depths = heads[..., :4], heads[..., 4]
    norms = np.linalg.norm(raw, axis=-1)
    valid = norms > RAW_NORM_EPSILON
    unit = np.where(valid[..., None], raw / np.where(valid, norms, 1.0)[..., None], IDENTITY)
    return unit, norms, valid, depths


def predict(model: RegressorModel, observations: ArrayLike) -> list[HypothesisSet]:
    x = np.atleast_2d(np.asarray(observations, dtype=float))
    _check_width(model, x)
    out, _, _ = _forward_cache(model, x)
    unit, _, _, depths = _decode(out, model.m)
    rotations = _to_hemisphere(unit)
    return [HypothesisSet(rotations=r.tolist(), depths=d.tolist()) for r, d in zip(rotations, depths)]


def forward(model: RegressorModel, observation: ArrayLike) -> HypothesisSet:
    observation = np.asarray(observation, dtype=float)
    if observation.ndim != 1:
        raise WidthMismatchError(f"Expected a single observation vector, got shape {observation.shape}")
    return predict(model, observation)[0]


def _loss_and_gradients(
    model: RegressorModel,
    x: np.ndarray,
    q_gt: np.ndarray,
    d_gt: np.ndarray,
    epsilon: float,
    lambda_depth: float,
    active: np.ndarray,
) -> tuple[float, list[np.ndarray], np.ndarray]:
    """Batch-mean meta loss, its gradient per parameter array and the winners."""
    out, activations, pre_activations = _forward_cache(model, x)
    unit, norms, valid, depths = _decode(out, model.m)

    c = np.sum(unit * q_gt[:, None, :], axis=-1)
    rot_losses = np.arccos(np.clip(2.0 * c * c - 1.0, -1.0, 1.0))
    depth_error = depths - d_gt[:, None]
    losses = rot_losses + lambda_depth * smooth_l1(depth_error)
    weights, winners = _relaxed_weights(losses, active, epsilon)
    batch = len(x)
    loss = float(np.sum(weights * np.where(active, losses, 0.0)) / batch)

    # the hemisphere flip is a sign change the loss ignores, so differentiate at the unit vector
    d_unit = rotation_loss_gradient(unit, np.broadcast_to(q_gt[:, None, :], unit.shape))
    tangent = d_unit - np.sum(d_unit * unit, axis=-1, keepdims=True) * unit
    d_raw = np.where(valid[..., None], tangent / np.where(valid, norms, 1.0)[..., None], 0.0)
    d_depth = lambda_depth * np.clip(depth_error, -1.0, 1.0)
    d_heads = weights[..., None] * np.concatenate([d_raw, d_depth[..., None]], axis=-1)
    delta = d_heads.reshape(batch, -1) / batch

    slope = model.spec.leaky_slope
    n_layers = len(model.weights)
    grad_w: list[np.ndarray] = [None] * n_layers
    grad_b: list[np.ndarray] = [None] * n_layers
    for layer in reversed(range(n_layers)):
        grad_w[layer] = delta.T @ activations[layer]
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ model.weights[layer]) * np.where(pre_activations[layer - 1] > 0.0, 1.0, slope)
    gradients = [g for pair in zip(grad_w, grad_b) for g in pair]
    return loss, gradients, winners


def backward(
    model: RegressorModel,
    observation: ArrayLike,
    gt: tuple[ArrayLike, float],
    epsilon: float = 0.0,
    lambda_depth: float = 3.0,
    active_mask: Optional[ArrayLike] = None,
) -> tuple[float, list[np.ndarray]]:
    """Meta loss of one observation and its gradient, ordered like `model.parameters()`."""
    x = np.atleast_2d(np.asarray(observation, dtype=float))
    _check_width(model, x)
    q_gt, d_gt = gt
    q_gt = np.atleast_2d(as_unit_quaternion(q_gt))
    active = np.ones((1, model.m), dtype=bool) if active_mask is None else np.atleast_2d(np.asarray(active_mask, dtype=bool))
    loss, gradients, _ = _loss_and_gradients(
        model, x, q_gt, np.array([float(d_gt)]), epsilon, lambda_depth, active
    )
    return loss, gradients


class AdamOptimizer:
    def __init__(self, parameters: Sequence[np.ndarray], config: TrainConfig):
        self.config = config
        self.step_count = 0
        self._first = [np.zeros_like(p) for p in parameters]
        self._second = [np.zeros_like(p) for p in parameters]

    def step(
        self,
        parameters: Sequence[np.ndarray],
        gradients: Sequence[np.ndarray],
        learning_rate: Optional[float] = None,
    ) -> None:
        cfg = self.config
        rate = cfg.learning_rate if learning_rate is None else learning_rate
        self.step_count += 1
        correction1 = 1.0 - cfg.adam_beta1**self.step_count
        correction2 = 1.0 - cfg.adam_beta2**self.step_count
        for param, grad, first, second in zip(parameters, gradients, self._first, self._second):
            first *= cfg.adam_beta1
            first += (1.0 - cfg.adam_beta1) * grad
            second *= cfg.adam_beta2
            second += (1.0 - cfg.adam_beta2) * grad * grad
            param -= rate * (first / correction1) / (np.sqrt(second / correction2) + cfg.adam_epsilon)


def epsilon_schedule(config: TrainConfig, epoch: int) -> float:
    """Linear per-epoch decay from epsilon_start to epsilon_end."""
    if config.epochs == 1:
        return config.epsilon_start
    fraction = epoch / (config.epochs - 1)
    return config.epsilon_start + fraction * (config.epsilon_end - config.epsilon_start)


def learning_rate_schedule(config: TrainConfig, epoch: int) -> float:
    """Geometric per-epoch decay from learning_rate to learning_rate_end."""
    if config.learning_rate_end is None or config.epochs == 1:
        return config.learning_rate
    fraction = epoch / (config.epochs - 1)
    return config.learning_rate * (config.learning_rate_end / config.learning_rate) ** fraction


def dropout_masks(rng: np.random.Generator, n: int, m: int, p: float) -> np.ndarray:
    """Per-sample active masks; every row keeps at least one head."""
    if m == 1 or p == 0.0:
        return np.ones((n, m), dtype=bool)
    active = rng.random((n, m)) >= p
    empty = ~active.any(axis=1)
    active[np.flatnonzero(empty), rng.integers(m, size=int(empty.sum()))] = True
    return active


def _training_arrays(samples: Sequence[ToySample]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = np.array([s.observation for s in samples], dtype=float)
    q_gt = as_unit_quaternion(np.array([s.gt_rotation for s in samples], dtype=float))
    d_gt = np.array([s.gt_depth for s in samples], dtype=float)
    return x, np.atleast_2d(q_gt), d_gt


def train(
    samples: Sequence[ToySample],
    spec: ModelSpec,
    config: Optional[TrainConfig] = None,
) -> tuple[RegressorModel, TrainingLog]:
    config = config or TrainConfig()
    if not samples:
        raise EmptyDatasetError("Cannot train on an empty dataset")
    if spec.m > 1 and max(config.epsilon_start, config.epsilon_end) >= (spec.m - 1) / spec.m:
        raise InvalidRelaxationError(f"Relaxation too large for M = {spec.m}")

    x, q_gt, d_gt = _training_arrays(samples)
    model = init_model(spec)
    _check_width(model, x)
    optimizer = AdamOptimizer(model.parameters(), config)
    rng = np.random.default_rng(config.seed)
    log = TrainingLog()

    logger.info(
        "Training M=%d on %d samples for %d epochs (batch %d)", spec.m, len(x), config.epochs, config.batch_size
    )
    for epoch in range(config.epochs):
        epsilon = epsilon_schedule(config, epoch)
        rate = learning_rate_schedule(config, epoch)
        order = rng.permutation(len(x))
        masks = dropout_masks(rng, len(x), spec.m, config.dropout_p)
        total = 0.0
        histogram = np.zeros(spec.m, dtype=int)
        for start in range(0, len(x), config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, gradients, winners = _loss_and_gradients(
                model, x[idx], q_gt[idx], d_gt[idx], epsilon, config.lambda_depth, masks[idx]
            )
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in gradients):
                raise TrainingDivergedError(
                    f"Loss diverged at epoch {epoch}, step {optimizer.step_count + 1} (loss {loss})"
                )
            optimizer.step(model.parameters(), gradients, rate)
            if not all(np.all(np.isfinite(p)) for p in model.parameters()):
                raise TrainingDivergedError(f"Non-finite parameters after step {optimizer.step_count}")
            total += loss * len(idx)
            histogram += np.bincount(winners, minlength=spec.m)

        record = EpochRecord(
            epoch=epoch,
            epsilon=epsilon,
            learning_rate=rate,
            mean_loss=total / len(x),
            winner_histogram=histogram.tolist(),
        )
        log.epochs.append(record)
        logger.info("Epoch %d: epsilon %.4f, lr %.2e, mean loss %.5f", epoch, epsilon, rate, record.mean_loss)
    return model, log
