import numpy as np
import pytest

from src.errors import (
    DegenerateAxisError,
    IllConditionedLogError,
    InvalidQuaternionError,
    InvalidRotationError,
)
from src.rotation.domain import IDENTITY
from src.rotation import service


@pytest.fixture
def rng():
    """Seeded generator for random rotations."""
    return np.random.default_rng(7)


def about_z(angle):
    return service.from_axis_angle([0.0, 0.0, 1.0], angle)


class TestHemisphere:
    """Tests for the single-representative sign convention."""

    def test_negative_scalar_flipped(self):
        """q1 < 0 flips the whole quaternion."""
        result = service.to_hemisphere([-0.5, 0.5, -0.5, 0.5])

        np.testing.assert_array_equal(result, [0.5, -0.5, 0.5, -0.5])

    def test_zero_scalar_uses_first_nonzero(self):
        """With q1 = 0 the first nonzero component becomes positive."""
        result = service.to_hemisphere([0.0, 0.0, -1.0, 0.0])

        np.testing.assert_array_equal(result, [0.0, 0.0, 1.0, 0.0])

    def test_batch_idempotent(self, rng):
        """Mapping twice equals mapping once."""
        quats = service.normalize(rng.standard_normal((50, 4)))

        once = service.to_hemisphere(quats)

        np.testing.assert_array_equal(service.to_hemisphere(once), once)
        assert np.all(once[:, 0] >= 0.0)

    def test_non_unit_rejected(self):
        """Raises for a quaternion that is not unit length."""
        with pytest.raises(InvalidQuaternionError):
            service.to_hemisphere([1.0, 1.0, 0.0, 0.0])

    def test_wrong_width_rejected(self):
        """Raises for a three-component input."""
        with pytest.raises(InvalidQuaternionError):
            service.as_unit_quaternion([1.0, 0.0, 0.0])


class TestRotationLoss:
    """Tests for the rotation angle between two quaternions."""

    def test_coincident_is_zero(self, rng):
        """Equal rotations give zero loss."""
        q = service.random_quaternions(1, rng)[0]

        assert service.rotation_loss(q, q) == pytest.approx(0.0, abs=1e-6)

    def test_antipode_is_zero(self, rng):
        """q and -q describe the same rotation."""
        q = service.random_quaternions(1, rng)[0]

        assert service.rotation_loss(q, -q) == pytest.approx(0.0, abs=1e-6)

    def test_quarter_turn(self):
        """A 90 degree rotation about z is pi/2 from the identity."""
        assert service.rotation_loss(about_z(np.pi / 2), IDENTITY) == pytest.approx(np.pi / 2)

    def test_half_turn(self):
        """A 180 degree rotation is pi from the identity."""
        assert service.rotation_loss(about_z(np.pi), IDENTITY) == pytest.approx(np.pi)

    def test_symmetric(self, rng):
        """The loss does not depend on argument order."""
        a, b = service.random_quaternions(2, rng)

        assert service.rotation_loss(a, b) == pytest.approx(service.rotation_loss(b, a))

    def test_twice_quaternion_distance(self, rng):
        """The rotation angle is twice the quotient distance."""
        a = service.random_quaternions(20, rng)
        b = service.random_quaternions(20, rng)

        np.testing.assert_allclose(service.rotation_loss(a, b), 2.0 * service.quat_distance(a, b), atol=1e-6)


class TestRotationLossGradient:
    """Tests for the derivative of the rotation loss."""

    def test_matches_finite_differences(self, rng):
        """Agrees with central differences away from the arccos boundary."""
        q_gt = service.random_quaternions(1, rng)[0]
        q = service.normalize(q_gt + 0.5 * rng.standard_normal(4))

        def loss(x):
            c = np.dot(x, q_gt)
            return np.arccos(2.0 * c * c - 1.0)

        step = 1e-6
        numeric = np.array([(loss(q + step * e) - loss(q - step * e)) / (2 * step) for e in np.eye(4)])

        np.testing.assert_allclose(service.rotation_loss_gradient(q, q_gt), numeric, rtol=1e-5, atol=1e-7)

    def test_finite_at_coincidence(self):
        """The capped derivative stays finite when q equals q_gt."""
        gradient = service.rotation_loss_gradient(IDENTITY, IDENTITY)

        assert np.all(np.isfinite(gradient))


class TestQuatDistance:
    """Tests for the distance on the antipodal quotient."""

    def test_range(self, rng):
        """Distances lie in [0, pi/2]."""
        a = service.random_quaternions(100, rng)
        b = service.random_quaternions(100, rng)

        distances = service.quat_distance(a, b)

        assert np.all(distances >= 0.0)
        assert np.all(distances <= np.pi / 2 + 1e-12)

    def test_half_turn_is_boundary(self):
        """A 180 degree rotation sits at distance pi/2."""
        assert service.quat_distance(about_z(np.pi), IDENTITY) == pytest.approx(np.pi / 2)


class TestRotationAxis:
    """Tests for extracting rotation axes."""

    def test_axis_of_z_rotation(self):
        """A rotation about z has axis z."""
        np.testing.assert_allclose(service.rotation_axis(about_z(0.3)), [0.0, 0.0, 1.0])

    def test_identity_degenerate(self):
        """The identity has no defined axis."""
        with pytest.raises(DegenerateAxisError):
            service.rotation_axis(IDENTITY)

    def test_batch_mask(self):
        """The batch variant flags undefined axes instead of raising."""
        axes, usable = service.rotation_axes(np.stack([IDENTITY, about_z(0.5)]))

        np.testing.assert_array_equal(usable, [False, True])
        np.testing.assert_allclose(axes[1], [0.0, 0.0, 1.0])


class TestMatrixConversion:
    """Tests for quaternion and rotation matrix conversions."""

    def test_round_trip(self, rng):
        """from_matrix inverts to_matrix up to the hemisphere sign."""
        for q in service.random_quaternions(20, rng):
            np.testing.assert_allclose(service.from_matrix(service.to_matrix(q)), q, atol=1e-9)

    def test_half_turn_matrix(self):
        """A half turn about x maps to a hemisphere quaternion with q1 = 0."""
        result = service.from_matrix(np.diag([1.0, -1.0, -1.0]))

        np.testing.assert_allclose(result, [0.0, 1.0, 0.0, 0.0], atol=1e-12)

    def test_reflection_rejected(self):
        """A determinant -1 matrix is not a rotation."""
        with pytest.raises(InvalidRotationError):
            service.from_matrix(np.diag([1.0, 1.0, -1.0]))

    def test_rotate_point(self):
        """A quarter turn about z takes x to y."""
        np.testing.assert_allclose(service.rotate_point(about_z(np.pi / 2), [1.0, 0.0, 0.0]), [0.0, 1.0, 0.0], atol=1e-12)

    def test_multiply_composes(self, rng):
        """The matrix of a product is the product of the matrices, over ten thousand random pairs."""
        a = service.random_quaternions(10_000, rng)
        b = service.random_quaternions(10_000, rng)

        np.testing.assert_allclose(
            service.to_matrix(service.multiply(a, b)), service.to_matrix(a) @ service.to_matrix(b), atol=1e-12
        )
        np.testing.assert_allclose(
            service.rotate_point(service.multiply(a, b), [0.3, -0.4, 1.2]),
            service.rotate_point(a, service.rotate_point(b, [0.3, -0.4, 1.2])),
            atol=1e-12,
        )

    def test_conjugate_inverts(self, rng):
        """q * conj(q) is the identity."""
        q = service.random_quaternions(1, rng)[0]

        np.testing.assert_allclose(service.multiply(q, service.conjugate(q)), IDENTITY, atol=1e-12)


class TestTangentMaps:
    """Tests for the log and exp maps."""

    def test_log_of_quarter_turn(self):
        """The tangent vector of a 90 degree z rotation has length pi/4 along z."""
        np.testing.assert_allclose(service.log_map(IDENTITY, about_z(np.pi / 2)), [0.0, 0.0, np.pi / 4], atol=1e-12)

    def test_exp_inverts_log(self, rng):
        """exp(base, log(base, q)) recovers q for q within the open ball."""
        base = service.random_quaternions(1, rng)[0]
        for q in service.random_quaternions(20, rng):
            if service.quat_distance(base, q) > 1.5:
                continue
            recovered = service.exp_map(base, service.log_map(base, q))
            assert service.quat_distance(recovered, q) == pytest.approx(0.0, abs=1e-7)

    def test_log_norm_equals_distance(self, rng):
        """The tangent vector length is the quaternion distance."""
        base, q = service.random_quaternions(2, rng)

        assert np.linalg.norm(service.log_map(base, q)) == pytest.approx(service.quat_distance(base, q))

    def test_exp_of_zero(self, rng):
        """A zero tangent vector stays at the base."""
        base = service.random_quaternions(1, rng)[0]

        np.testing.assert_allclose(service.exp_map(base, np.zeros(3)), base, atol=1e-12)

    def test_log_at_boundary_rejected(self):
        """Distance pi/2 is ill-conditioned."""
        with pytest.raises(IllConditionedLogError):
            service.log_map(IDENTITY, about_z(np.pi))


class TestRandomQuaternions:
    """Tests for uniform rotation sampling."""

    def test_unit_and_hemisphere(self, rng):
        """Samples are unit quaternions in hemisphere form."""
        quats = service.random_quaternions(500, rng)

        np.testing.assert_allclose(np.linalg.norm(quats, axis=1), 1.0)
        assert np.all(quats[:, 0] >= 0.0)

    def test_seeded(self):
        """Equal seeds give equal samples."""
        a = service.random_quaternions(5, np.random.default_rng(3))
        b = service.random_quaternions(5, np.random.default_rng(3))

        np.testing.assert_array_equal(a, b)
