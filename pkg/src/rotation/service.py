"""Quaternion algebra on the unit 3-sphere with antipodal identification.

Every function accepts a single quaternion of shape (4,) or a batch of shape (N, 4)
unless noted otherwise. Public functions validate unit norm; the underscored helpers
skip validation and are meant for inner loops that already hold unit quaternions.
"""
import numpy as np
from numpy.typing import ArrayLike

from src.errors import (
    DegenerateAxisError,
    IllConditionedLogError,
    InvalidQuaternionError,
    InvalidRotationError,
)
from src.rotation.domain import (
    AXIS_EPSILON,
    LOG_BOUNDARY_TOLERANCE,
    LOSS_GRADIENT_CAP,
    ROTATION_TOLERANCE,
    UNIT_TOLERANCE,
    Quaternion,
    RotationAxis,
    TangentVector,
)


def as_unit_quaternion(q: ArrayLike) -> Quaternion:
    """Validate shape and unit norm, returning a float array."""
    q = np.asarray(q, dtype=float)
    if q.shape[-1:] != (4,):
        raise InvalidQuaternionError(f"Quaternion must have 4 components, got shape {q.shape}")
    norms = np.linalg.norm(q, axis=-1)
    if not np.all(np.abs(norms - 1.0) <= UNIT_TOLERANCE):
        worst = float(np.max(np.abs(norms - 1.0)))
        raise InvalidQuaternionError(f"Quaternion norm deviates from 1 by {worst:.3g}")
    return q


def normalize(q: ArrayLike) -> Quaternion:
    q = np.asarray(q, dtype=float)
    norms = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise InvalidQuaternionError("Cannot normalize a zero quaternion")
    return q / norms


def _hemisphere_signs(q: np.ndarray) -> np.ndarray:
    # sign of the first nonzero component; q1 decides unless it is exactly zero
    lead_index = np.argmax(q != 0.0, axis=-1)
    lead = np.take_along_axis(q, lead_index[..., None], axis=-1)[..., 0]
    return np.where(lead < 0.0, -1.0, 1.0)


def _to_hemisphere(q: np.ndarray) -> np.ndarray:
    return q * _hemisphere_signs(q)[..., None]


def to_hemisphere(q: ArrayLike) -> Quaternion:
    """Map q to the representative with q1 >= 0 (ties: first nonzero of q2..q4 positive)."""
    return _to_hemisphere(as_unit_quaternion(q))


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sum(a * b, axis=-1)


def rotation_loss(q: ArrayLike, q_gt: ArrayLike) -> np.ndarray:
    """Angle between the two rotations in radians, in [0, pi], sign invariant."""
    q = as_unit_quaternion(q)
    q_gt = as_unit_quaternion(q_gt)
    c = _dot(q, q_gt)
    return np.arccos(np.clip(2.0 * c * c - 1.0, -1.0, 1.0))


def rotation_loss_gradient(q: ArrayLike, q_gt: ArrayLike) -> np.ndarray:
    """d rotation_loss / d q, with |2<q,q_gt>^2 - 1| capped to keep the derivative finite."""
    q = np.asarray(q, dtype=float)
    q_gt = np.asarray(q_gt, dtype=float)
    c = _dot(q, q_gt)
    x = np.clip(2.0 * c * c - 1.0, -LOSS_GRADIENT_CAP, LOSS_GRADIENT_CAP)
    scale = -4.0 * c / np.sqrt(1.0 - x * x)
    return scale[..., None] * q_gt


def _quat_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.arccos(np.clip(np.abs(_dot(a, b)), 0.0, 1.0))


def quat_distance(a: ArrayLike, b: ArrayLike) -> np.ndarray:
    """Geodesic distance on the antipodal quotient, in [0, pi/2]; half the rotation angle."""
    return _quat_distance(as_unit_quaternion(a), as_unit_quaternion(b))


def rotation_axis(q: ArrayLike) -> RotationAxis:
    q = as_unit_quaternion(q)
    if q.ndim != 1:
        raise InvalidQuaternionError("rotation_axis expects a single quaternion")
    vector = q[1:]
    norm = float(np.linalg.norm(vector))
    if norm <= AXIS_EPSILON:
        raise DegenerateAxisError(f"Rotation axis undefined, vector part norm is {norm:.3g}")
    return vector / norm


def rotation_axes(quats: ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    """Unit axes of a batch plus the mask of quaternions whose axis is defined."""
    quats = np.atleast_2d(as_unit_quaternion(quats))
    vectors = quats[:, 1:]
    norms = np.linalg.norm(vectors, axis=1)
    usable = norms > AXIS_EPSILON
    axes = np.zeros_like(vectors)
    axes[usable] = vectors[usable] / norms[usable, None]
    return axes, usable


def _multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def multiply(a: ArrayLike, b: ArrayLike) -> Quaternion:
    """Hamilton product a * b (apply b first, then a)."""
    return _multiply(as_unit_quaternion(a), as_unit_quaternion(b))


def _conjugate(q: np.ndarray) -> np.ndarray:
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def conjugate(q: ArrayLike) -> Quaternion:
    return _conjugate(as_unit_quaternion(q))


def _to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    rows = [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
    return np.stack([np.stack(row, axis=-1) for row in rows], axis=-2)


def to_matrix(q: ArrayLike) -> np.ndarray:
    return _to_matrix(as_unit_quaternion(q))


def from_matrix(rotation: ArrayLike) -> Quaternion:
    """Hemisphere quaternion of a 3x3 rotation matrix (Shepperd's method)."""
    R = np.asarray(rotation, dtype=float)
    if R.shape != (3, 3):
        raise InvalidRotationError(f"Rotation matrix must be 3x3, got shape {R.shape}")
    if not np.allclose(R.T @ R, np.eye(3), atol=ROTATION_TOLERANCE, rtol=0.0):
        raise InvalidRotationError("Matrix is not orthonormal")
    if abs(np.linalg.det(R) - 1.0) > ROTATION_TOLERANCE:
        raise InvalidRotationError(f"Matrix determinant is {np.linalg.det(R):.6f}, expected +1")

    trace = R[0, 0] + R[1, 1] + R[2, 2]
    pivot = int(np.argmax([trace, R[0, 0], R[1, 1], R[2, 2]]))
    if pivot == 0:
        s = 2.0 * np.sqrt(1.0 + trace)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif pivot == 1:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif pivot == 2:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    return _to_hemisphere(normalize(q))


def rotate_point(q: ArrayLike, point: ArrayLike) -> np.ndarray:
    return np.einsum("...ij,...j->...i", to_matrix(q), np.asarray(point, dtype=float))


def from_axis_angle(axis: ArrayLike, angle: ArrayLike) -> Quaternion:
    """Quaternion (cos(angle/2), sin(angle/2) * axis); not hemisphere-mapped."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * np.asarray(angle, dtype=float)
    return np.concatenate(
        [np.cos(half)[..., None], np.sin(half)[..., None] * axis], axis=-1
    )


def random_quaternions(n: int, rng: np.random.Generator) -> Quaternion:
    """n rotations uniform on SO(3), hemisphere form."""
    return _to_hemisphere(normalize(rng.standard_normal((n, 4))))


def _log_map(base: np.ndarray, q: np.ndarray) -> np.ndarray:
    relative = _multiply(_conjugate(base), q)
    relative = _to_hemisphere(relative)
    vector = relative[..., 1:]
    sine = np.linalg.norm(vector, axis=-1)
    angle = np.arctan2(sine, relative[..., 0])
    scale = np.divide(angle, sine, out=np.ones_like(sine), where=sine > 0.0)
    return scale[..., None] * vector


def _exp_map(base: np.ndarray, v: np.ndarray) -> np.ndarray:
    angle = np.linalg.norm(v, axis=-1)
    relative = np.concatenate(
        [np.cos(angle)[..., None], np.sinc(angle / np.pi)[..., None] * v], axis=-1
    )
    q = _multiply(base, relative)
    return _to_hemisphere(q / np.linalg.norm(q, axis=-1, keepdims=True))


def log_map(base: ArrayLike, q: ArrayLike) -> TangentVector:
    """Tangent vector at `base` pointing to q; its norm equals quat_distance(base, q)."""
    base = as_unit_quaternion(base)
    q = as_unit_quaternion(q)
    distance = _quat_distance(base, q)
    if np.any(np.pi / 2 - distance <= LOG_BOUNDARY_TOLERANCE):
        raise IllConditionedLogError("log_map is ill-conditioned at quaternion distance pi/2")
    return _log_map(base, q)


def exp_map(base: ArrayLike, v: ArrayLike) -> Quaternion:
    return _exp_map(as_unit_quaternion(base), np.asarray(v, dtype=float))
