import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from uwpose.errors import ZeroNormQuaternion
from uwpose.geom import (
    IDENTITY,
    Pose,
    angular_distance,
    angular_distance_approx,
    look_at,
    quat_conj,
    quat_exp,
    quat_from_axis_angle,
    quat_left_matrix,
    quat_log,
    quat_mul,
    quat_normalize,
    quat_right_matrix,
    quat_to_matrix,
    rotate,
    slerp,
    yaw_of,
    yaw_quat,
)

S45 = np.sqrt(0.5)


def random_unit(rng, n=None):
    q = rng.normal(size=(4,) if n is None else (n, 4))
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def scipy_matrix(q):
    w, x, y, z = q
    return Rotation.from_quat([x, y, z, w]).as_matrix()


quats = st.lists(
    st.floats(-1, 1, allow_nan=False), min_size=4, max_size=4
).filter(lambda v: np.linalg.norm(v) > 0.1).map(lambda v: np.array(v) / np.linalg.norm(v))


class TestQuatMul:
    def test_identity(self):
        q = quat_normalize([0.3, -0.2, 0.9, 0.1])
        np.testing.assert_allclose(quat_mul(IDENTITY, q), q)
        np.testing.assert_allclose(quat_mul(q, IDENTITY), q)

    def test_conjugate_inverse(self):
        q = quat_normalize([0.3, -0.2, 0.9, 0.1])
        np.testing.assert_allclose(quat_mul(q, quat_conj(q)), IDENTITY, atol=1e-15)

    def test_i_times_j_is_k(self):
        np.testing.assert_allclose(quat_mul([0, 1, 0, 0], [0, 0, 1, 0]), [0, 0, 0, 1])
        # oracle: composing the rotation matrices agrees
        m = scipy_matrix(np.array([0, 1.0, 0, 0])) @ scipy_matrix(np.array([0, 0, 1.0, 0]))
        np.testing.assert_allclose(m, scipy_matrix(np.array([0, 0, 0, 1.0])), atol=1e-15)

    def test_norm_multiplicative(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=(2, 500, 4))
        na = np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1)
        np.testing.assert_allclose(np.linalg.norm(quat_mul(a, b), axis=-1), na, rtol=1e-9)

    def test_associative(self):
        rng = np.random.default_rng(2)
        a, b, c = (random_unit(rng, 1000) for _ in range(3))
        lhs = quat_mul(quat_mul(a, b), c)
        rhs = quat_mul(a, quat_mul(b, c))
        assert np.max(np.abs(lhs - rhs)) < 1e-12

    def test_matches_matrix_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            a, b = random_unit(rng), random_unit(rng)
            np.testing.assert_allclose(
                scipy_matrix(quat_mul(a, b)), scipy_matrix(a) @ scipy_matrix(b), atol=1e-12
            )

    def test_left_right_matrices(self):
        rng = np.random.default_rng(4)
        a, b = random_unit(rng), random_unit(rng)
        np.testing.assert_allclose(quat_left_matrix(a) @ b, quat_mul(a, b), atol=1e-15)
        np.testing.assert_allclose(quat_right_matrix(b) @ a, quat_mul(a, b), atol=1e-15)


class TestConjNormalize:
    def test_conj(self):
        np.testing.assert_array_equal(quat_conj(IDENTITY), IDENTITY)
        np.testing.assert_array_equal(quat_conj([0.7071, 0, 0, 0.7071]), [0.7071, 0, 0, -0.7071])
        q = np.array([0.1, 0.2, 0.3, 0.4])
        np.testing.assert_array_equal(quat_conj(quat_conj(q)), q)

    @pytest.mark.parametrize(
        "q, expected",
        [([2, 0, 0, 0], [1, 0, 0, 0]), ([1, 1, 1, 1], [0.5, 0.5, 0.5, 0.5])],
    )
    def test_normalize(self, q, expected):
        np.testing.assert_allclose(quat_normalize(q), expected)

    def test_zero_norm(self):
        with pytest.raises(ZeroNormQuaternion):
            quat_normalize([0, 0, 0, 0])

    @given(quats)
    def test_unit_after_normalize(self, q):
        assert abs(np.linalg.norm(quat_normalize(q * 3.7)) - 1) < 1e-9


class TestAngularDistance:
    def test_examples(self):
        q = quat_normalize([0.2, 0.4, -0.1, 0.8])
        assert angular_distance(q, q) == 0.0
        assert angular_distance(IDENTITY, [S45, 0, 0, S45]) == pytest.approx(np.pi / 2)
        assert angular_distance(q, -q) == pytest.approx(0.0, abs=1e-7)

    def test_unnormalized_estimate(self):
        assert angular_distance(IDENTITY, [3 * S45, 0, 0, 3 * S45]) == pytest.approx(np.pi / 2)

    def test_matches_matrix_oracle(self):
        rng = np.random.default_rng(5)
        a, b = random_unit(rng, 300), random_unit(rng, 300)
        d = angular_distance(a, b)
        for ai, bi, di in zip(a, b, d):
            rel = scipy_matrix(ai).T @ scipy_matrix(bi)
            angle = np.arccos(np.clip((np.trace(rel) - 1) / 2, -1, 1))
            assert di == pytest.approx(angle, abs=1e-6)

    def test_metric_axioms(self):
        rng = np.random.default_rng(6)
        a, b, c = (random_unit(rng, 10_000) for _ in range(3))
        dab, dba = angular_distance(a, b), angular_distance(b, a)
        assert np.all(dab >= 0) and np.all(dab <= np.pi)
        np.testing.assert_allclose(dab, dba, atol=1e-9)
        assert np.all(dab <= angular_distance(a, c) + angular_distance(c, b) + 1e-9)

    def test_left_invariance(self):
        rng = np.random.default_rng(7)
        a, b, g = (random_unit(rng, 10_000) for _ in range(3))
        d0 = angular_distance(a, b)
        d1 = angular_distance(quat_mul(g, a), quat_mul(g, b))
        assert np.max(np.abs(d0 - d1)) < 1e-9

    def test_approx_examples(self):
        assert angular_distance_approx(IDENTITY, IDENTITY) == 0.0
        # r = 0: 180 degree rotation
        assert angular_distance_approx(IDENTITY, [0, 1, 0, 0]) == pytest.approx(np.pi / 2)
        r = 0.99
        q = np.array([r, np.sqrt(1 - r * r), 0, 0])
        assert angular_distance_approx(IDENTITY, q) == pytest.approx(np.pi / 2 * 0.01)
        assert angular_distance_approx(IDENTITY, q) == pytest.approx(0.01571, abs=1e-5)
        assert angular_distance(IDENTITY, q) == pytest.approx(2 * np.arccos(0.99))
        assert angular_distance(IDENTITY, q) == pytest.approx(0.28308, abs=1e-5)

    def test_approx_zero_iff_exact_zero(self):
        rng = np.random.default_rng(8)
        a = random_unit(rng, 100)
        for q, other in [(a, a), (a, -a)]:
            assert np.all(angular_distance_approx(q, other) < 1e-12)
        b = random_unit(rng, 100)
        assert np.all((angular_distance_approx(a, b) > 0) == (angular_distance(a, b) > 0))


class TestSlerp:
    def test_endpoints(self):
        rng = np.random.default_rng(9)
        a, b = random_unit(rng), random_unit(rng)
        np.testing.assert_allclose(slerp(a, b, 0.0), a, atol=1e-12)
        assert angular_distance(slerp(a, b, 1.0), b) < 1e-7

    def test_midpoint(self):
        mid = slerp(IDENTITY, [S45, 0, 0, S45], 0.5)
        np.testing.assert_allclose(mid, quat_from_axis_angle([0, 0, 1], np.pi / 4), atol=1e-12)

    def test_nearly_equal_falls_back(self):
        a = IDENTITY
        b = quat_normalize([1, 1e-9, 0, 0])
        out = slerp(a, b, 0.5)
        assert np.linalg.norm(out) == pytest.approx(1.0)

    @pytest.mark.parametrize("t", [0.25, 0.5, 0.75])
    def test_geodesic_linearity(self, t):
        # oracle: rotate a by t times the relative axis-angle rotation
        rng = np.random.default_rng(10)
        for _ in range(200):
            a, b = random_unit(rng), random_unit(rng)
            rel = Rotation.from_matrix(scipy_matrix(a).T @ scipy_matrix(b)).as_rotvec()
            expected = scipy_matrix(a) @ Rotation.from_rotvec(t * rel).as_matrix()
            got = slerp(a, b, t)
            np.testing.assert_allclose(scipy_matrix(got), expected, atol=1e-9)
            assert angular_distance(a, got) == pytest.approx(t * angular_distance(a, b), abs=1e-7)


class TestHelpers:
    def test_exp_log_roundtrip(self):
        rng = np.random.default_rng(11)
        v = rng.normal(size=(100, 3))
        v = v / np.linalg.norm(v, axis=1, keepdims=True) * rng.uniform(0, 3, size=(100, 1))
        np.testing.assert_allclose(quat_log(quat_exp(v)), v, atol=1e-12)
        np.testing.assert_allclose(quat_exp(np.zeros(3)), IDENTITY)

    def test_rotate_matches_oracle(self):
        rng = np.random.default_rng(12)
        q = random_unit(rng)
        v = rng.normal(size=(5, 3))
        np.testing.assert_allclose(rotate(q, v), v @ scipy_matrix(q).T, atol=1e-12)
        np.testing.assert_allclose(quat_to_matrix(q), scipy_matrix(q), atol=1e-12)

    def test_look_at_level(self):
        q = look_at([0, 0, 0], [0, 5, -3])
        np.testing.assert_allclose(rotate(q, [1, 0, 0]), [0, 1, 0], atol=1e-12)
        assert yaw_of(q) == pytest.approx(np.pi / 2)

    def test_look_at_pitched(self):
        q = look_at([0, 0, 0], [3, 0, -3], level=False)
        np.testing.assert_allclose(rotate(q, [1, 0, 0]), [S45, 0, -S45], atol=1e-12)

    def test_yaw_quat(self):
        assert yaw_of(yaw_quat(2.0)) == pytest.approx(2.0)

    def test_pose_vector(self):
        p = Pose([1, 2, 3], [1, 0, 0, 0])
        assert Pose.from_vector(p.as_vector()) == p
