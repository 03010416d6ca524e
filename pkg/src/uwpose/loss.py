"""Pose losses: the PoseNet beta-loss, the geometry-aware d-loss, and the
relation that converts an angular error into an equivalent translation.

Scalar functions (``position_loss``, ``d_loss`` ...) work on single poses and
are used for evaluation. ``batch_loss`` works on arrays of network outputs and
also returns gradients with respect to the raw position and quaternion
outputs; it is the training head.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from uwpose.errors import ConfigError, DomainError, ZeroNormQuaternion
from uwpose.geom import EPS_NORM, Pose, angular_distance, angular_distance_approx, quat_normalize

AngleForm = Literal["exact", "linear"]


@dataclass(frozen=True)
class LossConfig:
    mode: Literal["beta", "d"] = "d"
    beta: float = 250.0
    d: float = 3.0
    angle_form: AngleForm = "linear"

    def __post_init__(self):
        if self.mode not in ("beta", "d"):
            raise ConfigError(f"unknown loss mode {self.mode!r}")
        if self.angle_form not in ("exact", "linear"):
            raise ConfigError(f"unknown angle form {self.angle_form!r}")
        if self.mode == "beta" and not self.beta > 0:
            raise ConfigError("beta must be positive")
        if self.mode == "d" and not self.d > 0:
            raise ConfigError("d must be positive")


def position_loss(p, p_hat) -> float:
    return float(np.linalg.norm(np.asarray(p, dtype=float) - np.asarray(p_hat, dtype=float)))


def quaternion_l2_loss(q, q_hat) -> float:
    """``|q - q_hat/|q_hat||``, without any double-cover correction."""
    return float(np.linalg.norm(np.asarray(q, dtype=float) - quat_normalize(q_hat)))


def angle_term(q, q_hat, angle_form: AngleForm = "exact") -> float:
    if angle_form == "exact":
        return angular_distance(q, q_hat)
    return angular_distance_approx(q, q_hat)


def beta_loss(pred: Pose, truth: Pose, beta: float) -> float:
    if not beta > 0:
        raise DomainError("beta must be positive")
    return position_loss(truth.position, pred.position) + beta * quaternion_l2_loss(
        truth.orientation, pred.orientation
    )


def d_loss(pred: Pose, truth: Pose, d: float, angle_form: AngleForm = "exact") -> float:
    """Position error plus ``d`` times the angular error, in meters."""
    if not d > 0:
        raise DomainError("d must be positive")
    return position_loss(truth.position, pred.position) + d * angle_term(
        truth.orientation, pred.orientation, angle_form
    )


def composite(l_p: float, l_theta_rad: float, d: float) -> float:
    """``L = L_p + d * L_theta`` for already-aggregated error terms."""
    return l_p + d * l_theta_rad


def equivalent_translation(d: float, l_theta: float, small_angle: bool = False) -> float:
    """Translation that shifts the observed point as much as a rotation of ``l_theta``."""
    if small_angle:
        return d * l_theta
    if not 0.0 <= l_theta < 0.5 * np.pi:
        raise DomainError(f"tan diverges for angle {l_theta!r} >= pi/2")
    return d * float(np.tan(l_theta))


def loss_for(pred: Pose, truth: Pose, cfg: LossConfig) -> float:
    if cfg.mode == "beta":
        return beta_loss(pred, truth, cfg.beta)
    return d_loss(pred, truth, cfg.d, cfg.angle_form)


def batch_loss(p_hat, q_hat, p, q, cfg: LossConfig):
    """Per-sample losses and gradients for a batch of raw network outputs.

    ``p_hat`` (N, 3) and ``q_hat`` (N, 4, not normalized) are predictions,
    ``p`` and ``q`` the targets. Returns ``(losses, dp_hat, dq_hat)`` where the
    gradients are of each sample's own loss.
    """
    p_hat = np.asarray(p_hat, dtype=float)
    q_hat = np.asarray(q_hat, dtype=float)
    diff = p_hat - p
    lp = np.linalg.norm(diff, axis=1)
    # subgradient 0 at the kink
    dp = np.divide(diff, lp[:, None], out=np.zeros_like(diff), where=lp[:, None] > 0)

    qn = np.linalg.norm(q_hat, axis=1)
    if np.any(qn <= EPS_NORM) or not np.all(np.isfinite(qn)):
        raise ZeroNormQuaternion("network produced a zero-norm quaternion")
    u = q_hat / qn[:, None]

    if cfg.mode == "beta":
        e = q - u
        lq = np.linalg.norm(e, axis=1)
        g_u = np.divide(-e, lq[:, None], out=np.zeros_like(e), where=lq[:, None] > 0)
        weight, l_rot = cfg.beta, lq
    else:
        r = np.sum(q * u, axis=1)
        s = np.where(r < 0, -1.0, 1.0)
        ar = np.minimum(np.abs(r), 1.0)
        if cfg.angle_form == "linear":
            l_rot = 0.5 * np.pi * (1.0 - ar)
            dl_dar = np.full_like(ar, -0.5 * np.pi)
        else:
            l_rot = 2.0 * np.arccos(ar)
            one_minus = 1.0 - ar * ar
            dl_dar = np.where(one_minus > 1e-15, -2.0 / np.sqrt(np.maximum(one_minus, 1e-300)), 0.0)
        g_u = (dl_dar * s)[:, None] * q
        weight = cfg.d
    # project through u = q_hat / |q_hat|
    g_q = (g_u - np.sum(g_u * u, axis=1, keepdims=True) * u) / qn[:, None]
    return lp + weight * l_rot, dp, weight * g_q
