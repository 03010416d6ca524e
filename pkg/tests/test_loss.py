import math

import numpy as np
import pytest

from uwpose.errors import ConfigError, DomainError, ZeroNormQuaternion
from uwpose.geom import IDENTITY, Pose, angular_distance, quat_mul, rotate
from uwpose.loss import (
    LossConfig,
    batch_loss,
    beta_loss,
    composite,
    d_loss,
    equivalent_translation,
    position_loss,
    quaternion_l2_loss,
)

S45 = math.sqrt(0.5)


def random_pose(rng, scale=3.0):
    q = rng.normal(size=4)
    return Pose(rng.normal(size=3) * scale, q / np.linalg.norm(q))


def test_position_loss():
    assert position_loss([1, 2, 3], [1, 2, 3]) == 0
    assert position_loss([0, 0, 0], [3, 4, 0]) == 5
    assert position_loss([1, 1, 1], [2, 2, 2]) == pytest.approx(math.sqrt(3))


def test_quaternion_l2_loss():
    assert quaternion_l2_loss(IDENTITY, IDENTITY) == 0
    assert quaternion_l2_loss(IDENTITY, -IDENTITY) == pytest.approx(2.0)
    expected = math.hypot(1 - 0.7071, 0.7071)
    assert quaternion_l2_loss(IDENTITY, [0.7071, 0, 0, 0.7071]) == pytest.approx(expected, abs=1e-4)
    assert expected == pytest.approx(0.7654, abs=1e-4)
    with pytest.raises(ZeroNormQuaternion):
        quaternion_l2_loss(IDENTITY, [0, 0, 0, 0])


def test_beta_loss():
    truth = Pose([0, 0, 0], IDENTITY)
    assert beta_loss(truth, truth, 5.0) == 0
    # L_p = 1 and L_q = 0.5 give 1 + 2 * 0.5
    w = 1 - 0.125
    q = np.array([w, math.sqrt(1 - w * w), 0, 0])
    assert quaternion_l2_loss(IDENTITY, q) == pytest.approx(0.5)
    assert beta_loss(Pose([1, 0, 0], q), truth, 2.0) == pytest.approx(2.0)
    rng = np.random.default_rng(0)
    for _ in range(50):
        a, b = random_pose(rng), random_pose(rng)
        beta = rng.uniform(0.1, 500)
        indep = np.linalg.norm(a.position - b.position) + beta * np.linalg.norm(
            b.orientation - a.orientation / np.linalg.norm(a.orientation)
        )
        assert beta_loss(a, b, beta) == pytest.approx(indep)


@pytest.mark.parametrize(
    "lp, deg, d, reported",
    [(1.34, 2.09, 3, 1.45), (2.36, 0.86, 3, 2.41), (0.59, 12.15, 1, 0.80)],
)
def test_d_loss_table_rows(lp, deg, d, reported):
    # build a pose pair with exactly these error components
    theta = math.radians(deg)
    truth = Pose([0, 0, -2], IDENTITY)
    pred = Pose([lp, 0, -2], [math.cos(theta / 2), 0, math.sin(theta / 2), 0])
    got = d_loss(pred, truth, d, "exact")
    assert got == pytest.approx(lp + d * theta, abs=1e-12)
    assert abs(got - reported) <= 0.01
    assert composite(lp, theta, d) == pytest.approx(got)


def test_d_loss_angle_forms():
    truth = Pose([0, 0, 0], IDENTITY)
    pred = Pose([0, 0, 0], [0, 1, 0, 0])
    assert d_loss(pred, truth, 2.0, "exact") == pytest.approx(2 * math.pi)
    assert d_loss(pred, truth, 2.0, "linear") == pytest.approx(math.pi)
    with pytest.raises(DomainError):
        d_loss(pred, truth, 0.0)


def test_d_loss_properties():
    rng = np.random.default_rng(1)
    for _ in range(500):
        a, b = random_pose(rng), random_pose(rng)
        d = rng.uniform(0.1, 10)
        assert d_loss(a, b, d) >= position_loss(a.position, b.position)
        assert d_loss(a, a, d) < 1e-9
        # rigid world re-orientation of both poses
        g = rng.normal(size=4)
        g /= np.linalg.norm(g)
        ga = Pose(rotate(g, a.position), quat_mul(g, a.orientation))
        gb = Pose(rotate(g, b.position), quat_mul(g, b.orientation))
        assert d_loss(ga, gb, d) == pytest.approx(d_loss(a, b, d), abs=1e-9)


def test_equivalent_translation():
    assert equivalent_translation(3, 0.0) == 0
    assert equivalent_translation(3, 0.0, small_angle=True) == 0
    assert equivalent_translation(3, 0.1) == pytest.approx(0.30100, abs=1e-5)
    assert equivalent_translation(3, 0.1) == pytest.approx(3 * math.tan(0.1))
    assert equivalent_translation(3, 0.1, small_angle=True) == pytest.approx(0.3)
    with pytest.raises(DomainError):
        equivalent_translation(3, math.pi / 2)
    for theta in np.linspace(1e-4, 0.17, 50):
        exact = equivalent_translation(2, theta)
        assert abs(exact - equivalent_translation(2, theta, True)) / exact < 0.01


def test_config_validation():
    with pytest.raises(ConfigError):
        LossConfig(mode="beta", beta=0)
    with pytest.raises(ConfigError):
        LossConfig(mode="d", d=-1)


@pytest.mark.parametrize(
    "cfg",
    [
        LossConfig(mode="beta", beta=7.0),
        LossConfig(mode="d", d=3.0, angle_form="linear"),
        LossConfig(mode="d", d=1.5, angle_form="exact"),
    ],
)
def test_batch_loss_gradients_fd(cfg):
    rng = np.random.default_rng(2)
    n = 6
    p_hat, p = rng.normal(size=(n, 3)), rng.normal(size=(n, 3))
    q_hat, q = rng.normal(size=(n, 4)), rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    losses, dp, dq = batch_loss(p_hat, q_hat, p, q, cfg)
    for i in range(n):
        ref = (
            beta_loss if cfg.mode == "beta" else lambda a, b, _: d_loss(a, b, cfg.d, cfg.angle_form)
        )(Pose(p_hat[i], q_hat[i]), Pose(p[i], q[i]), cfg.beta)
        assert losses[i] == pytest.approx(ref)
    h = 1e-6
    for arr, grad in ((p_hat, dp), (q_hat, dq)):
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = batch_loss(p_hat, q_hat, p, q, cfg)[0][idx[0]]
            arr[idx] = old - h
            dn = batch_loss(p_hat, q_hat, p, q, cfg)[0][idx[0]]
            arr[idx] = old
            assert grad[idx] == pytest.approx((up - dn) / (2 * h), rel=1e-5, abs=1e-7)


def test_batch_loss_zero_at_truth():
    p = np.zeros((2, 3))
    q = np.tile(IDENTITY, (2, 1))
    for cfg in (LossConfig(), LossConfig(angle_form="exact"), LossConfig(mode="beta")):
        losses, dp, dq = batch_loss(p, q, p, q, cfg)
        assert np.all(losses == 0) and np.all(dp == 0) and np.all(dq == 0)


def test_batch_loss_double_cover():
    q = np.array([[S45, 0, 0, S45]])
    losses, _, _ = batch_loss(np.zeros((1, 3)), -q, np.zeros((1, 3)), q, LossConfig())
    assert losses[0] == pytest.approx(0.0, abs=1e-15)
    assert angular_distance(q[0], -q[0]) == 0
