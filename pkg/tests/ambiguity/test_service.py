import numpy as np
import pytest

from src.ambiguity import service
from src.ambiguity.domain import AmbiguityReport
from src.errors import ConfigError, InsufficientAxesError, InsufficientHypothesesError
from src.rotation.service import _exp_map, from_axis_angle, multiply, random_quaternions, to_hemisphere, to_matrix

Z = [0.0, 0.0, 1.0]


@pytest.fixture
def rng():
    """Seeded generator."""
    return np.random.default_rng(5)


@pytest.fixture
def great_circle():
    """Thirty quaternions evenly spaced on the great circle spanned by q1 and q2."""
    t = 2.0 * np.pi * np.arange(30) / 30
    return np.stack([np.cos(t), np.sin(t), np.zeros(30), np.zeros(30)], axis=1)


def planar_axis_quats(n, rng):
    """Rotations whose axes all lie in the xy-plane."""
    theta = rng.uniform(0.0, np.pi, n)
    angle = rng.uniform(0.2, 2.5, n)
    axes = np.stack([np.cos(theta), np.sin(theta), np.zeros(n)], axis=1)
    return np.concatenate([np.cos(angle / 2)[:, None], np.sin(angle / 2)[:, None] * axes], axis=1)


class TestDetectAmbiguity:
    """Tests for the PCA ambiguity criterion."""

    def test_identical_copies(self, rng):
        """Copies of one rotation have a zero centred matrix."""
        q = random_quaternions(1, rng)[0]

        ambiguous, values = service.detect_ambiguity(np.stack([q] * 30))

        assert not ambiguous
        assert values[1] == pytest.approx(0.0, abs=1e-12)

    def test_great_circle_matches_svd(self, great_circle):
        """Singular values equal a direct SVD of the hemisphere-aligned, centred matrix."""
        aligned = to_hemisphere(great_circle)
        expected = np.linalg.svd(aligned - aligned.mean(axis=0), compute_uv=False)

        ambiguous, values = service.detect_ambiguity(great_circle)

        assert ambiguous
        np.testing.assert_allclose(values, expected, atol=1e-12)
        assert values[0] == pytest.approx(np.sqrt(15.0), rel=0.02)

    def test_tight_cluster_unambiguous(self, rng):
        """Thirty rotations within half a degree give a small second singular value."""
        center = random_quaternions(1, rng)[0]
        tangents = rng.standard_normal((30, 3))
        tangents *= np.radians(0.25) / np.linalg.norm(tangents, axis=1, keepdims=True)
        quats = _exp_map(np.broadcast_to(center, (30, 4)), tangents)

        ambiguous, values = service.detect_ambiguity(quats)

        assert not ambiguous
        assert values[1] < 0.2

    def test_sign_and_order_invariant(self, great_circle, rng):
        """Permutations and sign flips of hypotheses do not change the result."""
        flipped = great_circle * np.where(rng.random(30) < 0.5, -1.0, 1.0)[:, None]
        shuffled = flipped[rng.permutation(30)]

        _, original = service.detect_ambiguity(great_circle)
        _, changed = service.detect_ambiguity(shuffled)

        np.testing.assert_allclose(changed, original, atol=1e-12)

    def test_duplication_scales_by_sqrt2(self, rng):
        """Duplicating the set multiplies every singular value by sqrt(2)."""
        quats = random_quaternions(15, rng)

        single = service.centered_singular_values(quats)
        doubled = service.centered_singular_values(np.vstack([quats, quats]))

        np.testing.assert_allclose(doubled, np.sqrt(2.0) * single, rtol=1e-12, atol=1e-12)

    def test_first_singular_value_variant(self, great_circle):
        """singular_index=1 thresholds the dominant singular value."""
        ambiguous, values = service.detect_ambiguity(great_circle, threshold=3.0, singular_index=1)

        assert ambiguous == (values[0] > 3.0)

    def test_unknown_index_rejected(self, great_circle):
        """Only the first and second singular values are supported."""
        with pytest.raises(ConfigError):
            service.detect_ambiguity(great_circle, singular_index=3)

    def test_widest_cup_arc_only_crosses_first_value(self):
        """A 145 degree symmetry arc stays under 0.8 on the second singular value but not the first."""
        p = from_axis_angle([1.0, 0.0, 0.0], 0.7)
        arc = multiply(p, from_axis_angle([0.0, 0.0, 1.0], np.radians(np.linspace(-72.5, 72.5, 30))))

        values = service.centered_singular_values(arc)

        assert values[1] < 0.8 < values[0]
        assert not service.detect_ambiguity(arc)[0]
        assert service.detect_ambiguity(arc, singular_index=1)[0]

    def test_single_hypothesis_rejected(self):
        """At least two hypotheses are required."""
        with pytest.raises(InsufficientHypothesesError):
            service.detect_ambiguity([[1.0, 0.0, 0.0, 0.0]])


class TestScaledThreshold:
    """Tests for carrying the threshold to other hypothesis counts."""

    def test_sqrt_scaling(self):
        """Four times the hypotheses doubles the threshold."""
        assert service.scaled_threshold(0.8, 120) == pytest.approx(1.6)

    def test_identity_at_calibration_count(self):
        """At thirty hypotheses the threshold is unchanged."""
        assert service.scaled_threshold(0.8, 30) == pytest.approx(0.8)


class TestEstimateAxis:
    """Tests for the least-squares ambiguity axis."""

    def test_planar_axes_give_normal(self, rng):
        """Axes in the xy-plane yield the z axis with zero residual."""
        axis, residual, degenerate = service.estimate_axis(planar_axis_quats(12, rng))

        assert not degenerate
        assert residual == pytest.approx(0.0, abs=1e-9)
        assert np.arccos(min(1.0, abs(axis[2]))) < 1e-6

    def test_collinear_axes_degenerate(self):
        """Rotations about one axis leave a two-dimensional null space."""
        quats = from_axis_angle([0.0, 0.0, 1.0], [0.3, 0.7, 1.1, 1.9])

        _, _, degenerate = service.estimate_axis(quats)

        assert degenerate

    def test_residual_matches_gram_eigenvalue(self, rng):
        """The residual is the root of the smallest Gram eigenvalue."""
        quats = random_quaternions(20, rng)
        vectors = quats[:, 1:] / np.linalg.norm(quats[:, 1:], axis=1, keepdims=True)
        oracle = np.sqrt(np.linalg.eigvalsh(vectors.T @ vectors)[0])

        axis, residual, _ = service.estimate_axis(quats)

        assert residual == pytest.approx(oracle, abs=1e-9)
        assert np.linalg.norm(axis) == pytest.approx(1.0)

    def test_axis_is_optimal(self, rng):
        """No random unit direction has a smaller residual."""
        quats = random_quaternions(20, rng)
        vectors = quats[:, 1:] / np.linalg.norm(quats[:, 1:], axis=1, keepdims=True)
        directions = rng.standard_normal((10_000, 3))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)

        axis, _, _ = service.estimate_axis(quats)

        best = np.linalg.norm(vectors @ axis)
        assert np.all(np.linalg.norm(vectors @ directions.T, axis=0) >= best - 1e-12)

    def test_near_identity_skipped(self):
        """Identity hypotheses carry no axis and leave too few usable ones."""
        quats = np.vstack([np.tile([1.0, 0.0, 0.0, 0.0], (5, 1)), from_axis_angle([1.0, 0.0, 0.0], [0.5, 1.0])])

        with pytest.raises(InsufficientAxesError):
            service.estimate_axis(quats)

    def test_plane_fit_on_symmetry_arc(self, rng):
        """For an arc p Rz(t) the plane normal is the bisector direction R_p z - z, not R_p z."""
        p = random_quaternions(1, rng)[0]
        arc = multiply(p, from_axis_angle(Z, np.radians(np.linspace(-60.0, 60.0, 30))))
        symmetry_axis = to_matrix(p) @ np.array(Z)

        axis, _, degenerate = service.estimate_axis(arc)

        assert not degenerate
        assert service.axis_deviation(axis, symmetry_axis - np.array(Z)) < 1e-4

    def test_relative_method_on_symmetry_arc(self, rng):
        """Pairwise relative rotations of an arc p Rz(t) all turn about R_p z."""
        p = random_quaternions(1, rng)[0]
        arc = multiply(p, from_axis_angle(Z, np.radians(np.linspace(-60.0, 60.0, 30))))

        axis, residual, degenerate = service.estimate_axis(arc, method="relative")

        assert not degenerate
        assert residual == pytest.approx(0.0, abs=1e-9)
        assert service.axis_deviation(axis, to_matrix(p) @ np.array(Z)) < 1e-4

    def test_relative_method_on_ring(self, great_circle):
        """A ring about x has a well defined relative axis where the plane fit is degenerate."""
        axis, _, degenerate = service.estimate_axis(great_circle, method="relative")

        assert not degenerate
        assert service.axis_deviation(axis, [1.0, 0.0, 0.0]) < 1e-6

    def test_relative_method_flags_scattered_sets(self, rng):
        """Unrelated rotations disagree on the relative axis."""
        _, _, degenerate = service.estimate_axis(random_quaternions(30, rng), method="relative")

        assert degenerate

    def test_relative_method_needs_distinct_hypotheses(self, rng):
        """Identical hypotheses carry no relative rotation."""
        with pytest.raises(InsufficientAxesError):
            service.estimate_axis(np.stack([random_quaternions(1, rng)[0]] * 5), method="relative")

    def test_unknown_method_rejected(self, great_circle):
        """Only the plane and relative methods exist."""
        with pytest.raises(ConfigError):
            service.estimate_axis(great_circle, method="median")


class TestAxisDeviation:
    """Tests for the angle between undirected axes."""

    @pytest.mark.parametrize(
        "estimated, truth, expected",
        [
            ([0, 0, 1], [0, 0, 1], 0.0),
            ([0, 0, 1], [0, 0, -1], 0.0),
            ([0, 0, 1], [1, 0, 0], 90.0),
        ],
    )
    def test_examples(self, estimated, truth, expected):
        """Sign of the axis does not matter."""
        assert service.axis_deviation(estimated, truth) == pytest.approx(expected, abs=1e-9)


class TestAnalyze:
    """Tests for the combined ambiguity report."""

    def test_unambiguous_has_no_axis(self, rng):
        """Unambiguous sets carry no axis."""
        q = random_quaternions(1, rng)[0]

        report = service.analyze(np.stack([q] * 10))

        assert not report.ambiguous
        assert report.axis is None

    def test_ambiguous_planar_set(self, rng):
        """A spread set with planar axes reports the plane normal."""
        report = service.analyze(planar_axis_quats(30, rng))

        assert report.ambiguous
        assert report.axis is not None
        assert service.axis_deviation(report.axis, [0.0, 0.0, 1.0]) < 1e-4

    def test_ring_reports_degenerate_axis(self, great_circle):
        """A ring about one axis is ambiguous with a degenerate axis."""
        report = service.analyze(great_circle)

        assert report.ambiguous
        assert report.degenerate_axis
        assert report.axis is None

    def test_ring_axis_with_relative_method(self, great_circle):
        """The relative method reports the ring axis instead of a degenerate one."""
        report = service.analyze(great_circle, axis_method="relative")

        assert report.ambiguous
        assert not report.degenerate_axis
        assert report.axis_method == "relative"
        assert service.axis_deviation(report.axis, [1.0, 0.0, 0.0]) < 1e-6

    def test_report_rejects_unsorted_values(self):
        """Singular values must be descending."""
        with pytest.raises(ValueError):
            AmbiguityReport(singular_values=[0.1, 0.5, 0.0, 0.0], ambiguous=False)


class TestCalibrateThreshold:
    """Tests for threshold calibration on labelled views."""

    def test_separable_scores(self):
        """A threshold between the classes classifies every view."""
        threshold = service.calibrate_threshold([0.1, 0.2, 0.9, 1.0], [False, False, True, True])

        assert 0.2 < threshold < 0.9

    def test_single_class_keeps_default(self):
        """Without both classes the default threshold is kept."""
        assert service.calibrate_threshold([0.1, 0.5], [False, False]) == 0.8
