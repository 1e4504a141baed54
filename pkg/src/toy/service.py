"""Synthetic cube, cup and cylinder whose observations are invariant under their symmetries.

Instead of rendering images, an observation encodes a canonical member of the pose's
symmetry set, so every pose in the set yields the same observation vector.
"""
import logging
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike

from src.errors import ConfigError, InvalidDepthError
from src.rotation.service import (
    _multiply,
    _to_hemisphere,
    _to_matrix,
    as_unit_quaternion,
    from_axis_angle,
    random_quaternions,
)
from src.toy.domain import (
    CANONICAL_DECIMALS,
    FiniteGroup,
    ObjectId,
    PinholeCamera,
    SymmetrySet,
    ToyConfig,
    ToyObject,
    ToySample,
    ViewConditionalArc,
)

logger = logging.getLogger(__name__)

Z_AXIS = np.array([0.0, 0.0, 1.0])
X_AXIS = np.array([1.0, 0.0, 0.0])

CUBE_EDGE = 0.1
CUP_HEIGHT = 0.12
CUP_RADIUS = 0.04
CUP_VISIBILITY_THRESHOLD = 0.3


def _cube_points(edge: float) -> np.ndarray:
    # corners, edge midpoints and face centres: every point of {-1, 0, 1}^3 but the centre
    grid = np.array(np.meshgrid([-1, 0, 1], [-1, 0, 1], [-1, 0, 1], indexing="ij")).reshape(3, -1).T
    grid = grid[np.any(grid != 0, axis=1)]
    return 0.5 * edge * grid.astype(float)


def _cylinder_points(radius: float, height: float, n_angles: int, n_heights: int) -> np.ndarray:
    angles = 2.0 * np.pi * np.arange(n_angles) / n_angles
    heights = np.linspace(-0.5 * height, 0.5 * height, n_heights)
    a, h = np.meshgrid(angles, heights, indexing="ij")
    return np.stack([radius * np.cos(a), radius * np.sin(a), h], axis=-1).reshape(-1, 3)


def build_cube() -> ToyObject:
    elements = _to_hemisphere(from_axis_angle(Z_AXIS, 0.5 * np.pi * np.arange(4)))
    return ToyObject("cube", _cube_points(CUBE_EDGE), FiniteGroup(elements, Z_AXIS))


def build_cup() -> ToyObject:
    body = _cylinder_points(CUP_RADIUS, CUP_HEIGHT, 16, 4)
    handle = np.array([[1.5 * CUP_RADIUS, 0.0, 0.0]])
    symmetry = ViewConditionalArc(Z_AXIS, X_AXIS, CUP_VISIBILITY_THRESHOLD)
    return ToyObject("cup", np.vstack([body, handle]), symmetry)


def build_cylinder() -> ToyObject:
    points = _cylinder_points(CUP_RADIUS, CUP_HEIGHT, 64, 4)
    return ToyObject("cylinder", points, ViewConditionalArc(Z_AXIS, X_AXIS, -np.inf))


_BUILDERS = {"cube": build_cube, "cup": build_cup, "cylinder": build_cylinder}


def get_object(object_id: ObjectId) -> ToyObject:
    try:
        return _BUILDERS[object_id]()
    except KeyError:
        raise ConfigError(f"Unknown toy object '{object_id}', expected one of {sorted(_BUILDERS)}")


def symmetry_kind(obj: ToyObject) -> str:
    if isinstance(obj.symmetry, FiniteGroup):
        return f"finite-group/{len(obj.symmetry.elements)}"
    if np.isneginf(obj.symmetry.visibility_threshold):
        return "continuous-axial"
    return "view-conditional-arc"


def _arc_phase(symmetry: ViewConditionalArc, rotation: np.ndarray) -> tuple[float, float, float]:
    """Camera-frame z of the feature at theta = 0 and the (rho, phi) of rho * cos(theta - phi)."""
    side = np.cross(symmetry.axis, symmetry.feature)
    alpha = float((rotation @ symmetry.feature)[2])
    beta = float((rotation @ side)[2])
    return alpha, float(np.hypot(alpha, beta)), float(np.arctan2(beta, alpha))


def symmetry_set(obj: ToyObject, pose: ArrayLike) -> SymmetrySet:
    pose = _to_hemisphere(as_unit_quaternion(pose))
    symmetry = obj.symmetry
    if isinstance(symmetry, FiniteGroup):
        return SymmetrySet(pose=pose, members=_to_hemisphere(_multiply(pose, symmetry.elements)))

    alpha, rho, phi = _arc_phase(symmetry, _to_matrix(pose))
    if not alpha > symmetry.visibility_threshold:
        return SymmetrySet(pose=pose, members=pose[None, :])
    ratio = symmetry.visibility_threshold / rho if rho > 0.0 else -np.inf
    half_width = float(np.arccos(np.clip(ratio, -1.0, 1.0)))
    return SymmetrySet(pose=pose, axis=symmetry.axis, interval=(phi - half_width, phi + half_width))


def arc_member(arc: SymmetrySet, theta: ArrayLike) -> np.ndarray:
    """pose * Rot_axis(theta), hemisphere form."""
    return _to_hemisphere(_multiply(arc.pose, from_axis_angle(arc.axis, theta)))


def canonical_rotation(obj: ToyObject, pose: ArrayLike) -> np.ndarray:
    """Deterministic representative of the symmetry set of `pose`."""
    members = symmetry_set(obj, pose)
    if members.is_arc:
        # the member turning the feature furthest away from the camera
        phi = 0.5 * (members.interval[0] + members.interval[1])
        return arc_member(members, phi)
    if len(members.members) == 1:
        return members.members[0]
    keys = [tuple(np.round(m, CANONICAL_DECIMALS) + 0.0) for m in members.members]
    return members.members[max(range(len(keys)), key=lambda i: keys[i])]


def canonical_observation(
    obj: ToyObject,
    pose: ArrayLike,
    depth: float,
    noise_sigma: float = 0.0,
    seed: Optional[int] = None,
    depth_range: tuple[float, float] = (0.5, 2.0),
) -> np.ndarray:
    """Nine rotation-matrix entries of the canonical member plus the normalised depth."""
    rotation = np.round(_to_matrix(canonical_rotation(obj, pose)), CANONICAL_DECIMALS) + 0.0
    low, high = depth_range
    observation = np.append(rotation.ravel(), (depth - low) / (high - low))
    if noise_sigma > 0.0:
        observation = observation + np.random.default_rng(seed).normal(0.0, noise_sigma, observation.shape)
    return observation


def backproject(camera: PinholeCamera, u: float, v: float, depth: float) -> np.ndarray:
    if depth <= 0.0:
        raise InvalidDepthError(f"Depth must be positive, got {depth}")
    return np.array([(u - camera.cx) * depth / camera.fx, (v - camera.cy) * depth / camera.fy, depth])


def project(camera: PinholeCamera, translation: ArrayLike) -> tuple[float, float, float]:
    x, y, z = np.asarray(translation, dtype=float)
    if z <= 0.0:
        raise InvalidDepthError(f"Point must lie in front of the camera, got z = {z}")
    return camera.fx * x / z + camera.cx, camera.fy * y / z + camera.cy, float(z)


def _draw_sample(
    obj: ToyObject,
    camera: PinholeCamera,
    config: ToyConfig,
    rng: np.random.Generator,
) -> ToySample:
    pose = random_quaternions(1, rng)[0]
    depth = float(rng.uniform(*config.depth_range))
    u = float(rng.uniform(0.25 * camera.width, 0.75 * camera.width))
    v = float(rng.uniform(0.25 * camera.height, 0.75 * camera.height))

    members = symmetry_set(obj, pose)
    if members.is_arc:
        gt_rotation = arc_member(members, rng.uniform(*members.interval))
    else:
        gt_rotation = members.members[rng.integers(len(members.members))]
    noise_seed = int(rng.integers(2**63 - 1))
    observation = canonical_observation(obj, pose, depth, config.noise_sigma, noise_seed, config.depth_range)

    axis = None
    if members.is_ambiguous:
        axis = (_to_matrix(gt_rotation) @ obj.symmetry_axis).tolist()
    return ToySample(
        observation=observation.tolist(),
        gt_rotation=gt_rotation.tolist(),
        gt_depth=depth,
        bbox_center=(u, v),
        intrinsics=camera,
        ambiguous_gt=members.is_ambiguous,
        gt_axis_camera=axis,
    )


def sample_dataset(
    obj: ToyObject,
    n: int,
    camera: PinholeCamera,
    config: Optional[ToyConfig] = None,
    seed: int = 0,
) -> list[ToySample]:
    """n samples with uniform poses; each draws its randomness from (seed, index)."""
    if n <= 0:
        raise ValueError(f"Sample count must be positive, got {n}")
    config = config or ToyConfig()
    samples = [_draw_sample(obj, camera, config, np.random.default_rng([seed, index])) for index in range(n)]
    ambiguous = sum(s.ambiguous_gt for s in samples)
    logger.info("Generated %d %s samples (%d ambiguous)", n, obj.id, ambiguous)
    return samples
