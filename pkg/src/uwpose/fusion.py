"""Extended Kalman filter over position, velocity, attitude quaternion and body rate.

State vector (13): p (3), v (3), q (w, x, y, z), w (3, body frame). The
motion model is constant velocity and constant angular velocity driven by
white linear and angular acceleration. The quaternion lives in the state
directly and is renormalized after every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np

from uwpose.data import TimedSample, TrialDataset
from uwpose.errors import (
    ConfigError,
    DomainError,
    MaxGapExceeded,
    NonPositiveDt,
    OutOfOrderMeasurement,
    SingularInnovationCovariance,
)
from uwpose.geom import (
    Pose,
    quat_conj,
    quat_exp,
    quat_left_matrix,
    quat_mul,
    quat_normalize,
    quat_right_matrix,
)
from uwpose.regressor import NetParams, mc_dropout_predict

P_, V_, Q_, W_ = slice(0, 3), slice(3, 6), slice(6, 10), slice(10, 13)
STATE_DIM = 13
ERROR_DIM = 12
MEASUREMENT_DIMS = {"pose7": 7, "compass": 4, "altimeter": 1}
DEFAULT_NOISE_FLOOR = 1e-3


@dataclass(frozen=True)
class FilterConfig:
    """Process noise spectral densities, initial standard deviations per state
    block (p, v, q, w) and measurement-related knobs.

    ``max_dt`` rejects prediction gaps longer than the bound; ``gate`` is an
    optional chi-square threshold on the innovation Mahalanobis distance
    above which a measurement is skipped.
    """

    accel_std: float = 0.5
    angular_accel_std: float = 0.2
    init_std: tuple[float, float, float, float] = (1.0, 0.5, 0.1, 0.2)
    mc_dropout_k: int = 100
    noise_floor: float = DEFAULT_NOISE_FLOOR
    max_dt: float | None = None
    gate: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "init_std", tuple(float(v) for v in self.init_std))
        if not (self.accel_std > 0 and self.angular_accel_std > 0):
            raise ConfigError("process noise standard deviations must be positive")
        if len(self.init_std) != 4 or min(self.init_std) <= 0:
            raise ConfigError("init_std needs four positive entries (p, v, q, w)")
        if self.mc_dropout_k < 2 or not self.noise_floor > 0:
            raise ConfigError("mc_dropout_k must be >= 2 and noise_floor positive")
        if self.max_dt is not None and not self.max_dt > 0:
            raise ConfigError("max_dt must be positive")
        if self.gate is not None and not self.gate > 0:
            raise ConfigError("gate must be positive")


@dataclass(frozen=True, eq=False)
class EKFState:
    x: np.ndarray
    P: np.ndarray
    t: float = 0.0

    @property
    def p(self) -> np.ndarray:
        return self.x[P_]

    @property
    def v(self) -> np.ndarray:
        return self.x[V_]

    @property
    def q(self) -> np.ndarray:
        return self.x[Q_]

    @property
    def w(self) -> np.ndarray:
        return self.x[W_]

    @property
    def pose(self) -> Pose:
        return Pose(self.p.copy(), self.q.copy())


@dataclass(frozen=True, eq=False)
class Measurement:
    kind: Literal["pose7", "compass", "altimeter"]
    value: np.ndarray
    noise_std: np.ndarray
    timestamp: float

    def __post_init__(self):
        if self.kind not in MEASUREMENT_DIMS:
            raise DomainError(f"unknown measurement kind {self.kind!r}")
        n = MEASUREMENT_DIMS[self.kind]
        value = np.asarray(self.value, dtype=float).reshape(-1)
        std = np.broadcast_to(np.asarray(self.noise_std, dtype=float), (n,)).copy()
        if value.shape != (n,):
            raise DomainError(f"{self.kind} measurement needs {n} values, got {value.size}")
        if np.any(std < 0) or not np.all(np.isfinite(std)) or not np.all(np.isfinite(value)):
            raise DomainError("measurement values and noise must be finite, noise non-negative")
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "noise_std", std)
        object.__setattr__(self, "timestamp", float(self.timestamp))


def _finish(x: np.ndarray, P: np.ndarray, t: float) -> EKFState:
    x = x.copy()
    x[Q_] = quat_normalize(x[Q_])
    return EKFState(x, 0.5 * (P + P.T), t)


def ekf_init(pose: Pose, cfg: FilterConfig, t: float = 0.0) -> EKFState:
    x = np.zeros(STATE_DIM)
    x[P_] = pose.position
    x[Q_] = quat_normalize(pose.orientation)
    sp, sv, sq, sw = cfg.init_std
    P = np.diag(np.concatenate([np.full(3, sp**2), np.full(3, sv**2), np.full(4, sq**2), np.full(3, sw**2)]))
    return EKFState(x, P, float(t))


def exp_jacobian(r: np.ndarray) -> np.ndarray:
    """4x3 derivative of ``quat_exp(r)`` with respect to the rotation vector ``r``."""
    r = np.asarray(r, dtype=float)
    th = float(np.linalg.norm(r))
    if th < 1e-6:
        # series: s = 1/2 - th^2/48, ds/dth / th = -1/24
        top = -0.25 * r
        s, ds_over = 0.5 - th * th / 48.0, -1.0 / 24.0
    else:
        half = 0.5 * th
        top = -math.sin(half) / (2.0 * th) * r
        s = math.sin(half) / th
        ds_over = (0.5 * math.cos(half) * th - math.sin(half)) / th**3
    J = np.empty((4, 3))
    J[0] = top
    J[1:] = s * np.eye(3) + ds_over * np.outer(r, r)
    return J


def process_noise(q: np.ndarray, dt: float, cfg: FilterConfig) -> np.ndarray:
    """Piecewise white-acceleration noise for (p, v) and the analogous
    (attitude, rate) pair mapped onto the quaternion through its tangent."""
    Q = np.zeros((STATE_DIM, STATE_DIM))
    a2, b2 = cfg.accel_std**2, cfg.angular_accel_std**2
    c3, c2, c1 = dt**3 / 3.0, dt**2 / 2.0, dt
    eye = np.eye(3)
    Q[P_, P_] = a2 * c3 * eye
    Q[P_, V_] = Q[V_, P_] = a2 * c2 * eye
    Q[V_, V_] = a2 * c1 * eye
    G = 0.5 * quat_left_matrix(q)[:, 1:]
    Q[Q_, Q_] = b2 * c3 * G @ G.T
    Q[Q_, W_] = b2 * c2 * G
    Q[W_, Q_] = Q[Q_, W_].T
    Q[W_, W_] = b2 * c1 * eye
    return Q


def transition(x: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Propagated mean (before renormalization) and its 13x13 Jacobian."""
    q, w = x[Q_], x[W_]
    dq = quat_exp(w * dt)
    xn = x.copy()
    xn[P_] = x[P_] + x[V_] * dt
    xn[Q_] = quat_mul(q, dq)
    F = np.eye(STATE_DIM)
    F[P_, V_] = dt * np.eye(3)
    F[Q_, Q_] = quat_right_matrix(dq)
    F[Q_, W_] = quat_left_matrix(q) @ exp_jacobian(w * dt) * dt
    return xn, F


def ekf_predict(state: EKFState, dt: float, cfg: FilterConfig) -> EKFState:
    if not dt > 0:
        raise NonPositiveDt(f"prediction step dt={dt} must be positive")
    if cfg.max_dt is not None and dt > cfg.max_dt:
        raise MaxGapExceeded(f"gap of {dt:.3f} s exceeds max_dt={cfg.max_dt} s")
    xn, F = transition(state.x, dt)
    P = F @ state.P @ F.T + process_noise(state.q, dt, cfg)
    return _finish(xn, P, state.t + dt)


def measurement_model(state: EKFState, m: Measurement) -> tuple[np.ndarray, np.ndarray]:
    """Innovation and Jacobian. Quaternion measurements are first flipped into
    the hemisphere of the predicted quaternion."""
    x = state.x
    H = np.zeros((MEASUREMENT_DIMS[m.kind], STATE_DIM))
    if m.kind == "altimeter":
        H[0, 2] = 1.0
        return m.value - x[2:3], H
    z = m.value.copy()
    if m.kind == "pose7":
        H[0:3, P_] = np.eye(3)
        H[3:7, Q_] = np.eye(4)
        if z[3:] @ x[Q_] < 0:
            z[3:] = -z[3:]
        return z - np.concatenate([x[P_], x[Q_]]), H
    H[:, Q_] = np.eye(4)
    if z @ x[Q_] < 0:
        z = -z
    return z - x[Q_], H


@dataclass(frozen=True)
class UpdateInfo:
    accepted: bool
    mahalanobis2: float


def ekf_update_info(state: EKFState, m: Measurement, gate: float | None = None) -> tuple[EKFState, UpdateInfo]:
    y, H = measurement_model(state, m)
    R = np.diag(m.noise_std**2)
    S = H @ state.P @ H.T + R
    S = 0.5 * (S + S.T)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as e:
        raise SingularInnovationCovariance(f"{m.kind} innovation covariance not positive definite") from e
    if np.min(np.diag(L)) <= 1e-150:
        raise SingularInnovationCovariance(f"{m.kind} innovation covariance is singular")
    white = np.linalg.solve(L, y)
    d2 = float(white @ white)
    if gate is not None and d2 > gate:
        return state, UpdateInfo(False, d2)
    PHt = state.P @ H.T
    K = np.linalg.solve(S, PHt.T).T
    x = state.x + K @ y
    A = np.eye(STATE_DIM) - K @ H
    P = A @ state.P @ A.T + K @ R @ K.T
    return _finish(x, P, max(state.t, m.timestamp)), UpdateInfo(True, d2)


def ekf_update(state: EKFState, m: Measurement) -> EKFState:
    """Joseph-form Kalman update; no gating."""
    return ekf_update_info(state, m)[0]


def run_filter(
    measurements: Iterable[Measurement],
    cfg: FilterConfig,
    init: Pose,
    t0: float | None = None,
) -> list[tuple[float, EKFState]]:
    """Predict to each measurement time, then update. Measurements sharing a
    timestamp are applied in stream order without an intermediate predict.

    Returns the initial state followed by one post-update state per measurement.
    """
    ms = list(measurements)
    start = t0 if t0 is not None else (ms[0].timestamp if ms else 0.0)
    state = ekf_init(init, cfg, start)
    out = [(state.t, state)]
    for i, m in enumerate(ms):
        if m.timestamp < state.t:
            raise OutOfOrderMeasurement(f"measurement {i} at t={m.timestamp} precedes filter time {state.t}")
        dt = m.timestamp - state.t
        if dt > 0:
            state = ekf_predict(state, dt, cfg)
        state, _ = ekf_update_info(state, m, cfg.gate)
        out.append((state.t, state))
    return out


def estimator_measurement(
    params: NetParams | None,
    img: np.ndarray | None,
    k: int = 100,
    seed: int = 0,
    noise_floor: float = DEFAULT_NOISE_FLOOR,
    timestamp: float = 0.0,
    forward_fn=None,
) -> Measurement:
    """Pose measurement from Monte-Carlo dropout: mean pose, std floored per component."""
    mean, std = mc_dropout_predict(params, img, k=k, seed=seed, forward_fn=forward_fn)
    return Measurement(
        "pose7",
        np.concatenate([mean.position, mean.orientation]),
        np.maximum(std, noise_floor),
        timestamp,
    )


# -- consistency -----------------------------------------------------------------


def error_vector(state: EKFState, truth_x: np.ndarray) -> np.ndarray:
    """12-dim error: position, velocity, small rotation angle (body frame), rate."""
    q_hat = state.q
    q = truth_x[Q_]
    if q @ q_hat < 0:
        q = -q
    dq = quat_mul(quat_conj(q_hat), q)
    e = np.empty(ERROR_DIM)
    e[0:3] = truth_x[P_] - state.p
    e[3:6] = truth_x[V_] - state.v
    e[6:9] = 2.0 * dq[1:] * np.sign(dq[0] if dq[0] != 0 else 1.0)
    e[9:12] = truth_x[W_] - state.w
    return e


def error_covariance(state: EKFState) -> np.ndarray:
    """Covariance of ``error_vector``: the quaternion block is mapped onto the
    3-dim rotation error with ``2 * Xi(q_hat)^T``."""
    T = np.zeros((ERROR_DIM, STATE_DIM))
    T[0:6, 0:6] = np.eye(6)
    T[6:9, Q_] = 2.0 * quat_left_matrix(state.q)[:, 1:].T
    T[9:12, W_] = np.eye(3)
    return T @ state.P @ T.T


def nees(state: EKFState, truth_x: np.ndarray) -> float:
    e = error_vector(state, truth_x)
    C = error_covariance(state)
    return float(e @ np.linalg.solve(C, e))


# -- simulated sensors -----------------------------------------------------------


def noisy_pose_stream(
    truth: Sequence[tuple[float, Pose]],
    position_std: float,
    angle_std: float,
    seed: int,
    outlier_rate: float = 0.0,
    outlier_position: float = 3.0,
    outlier_angle: float = math.radians(45.0),
) -> list[Measurement]:
    """Stand-in pose estimator: truth plus Gaussian position noise and a random
    small rotation, with a fraction of gross outliers. Each measurement reports
    the nominal noise level (outliers are not flagged)."""
    rng = np.random.default_rng(seed)
    q_std = 0.5 * angle_std
    out = []
    for t, pose in truth:
        dp = rng.normal(0.0, position_std, 3)
        rv = rng.normal(0.0, angle_std, 3)
        if rng.random() < outlier_rate:
            dp = dp + outlier_position * _unit(rng)
            rv = rv + outlier_angle * _unit(rng)
        q = quat_mul(pose.orientation, quat_exp(rv))
        value = np.concatenate([pose.position + dp, q])
        std = np.concatenate([np.full(3, position_std), np.full(4, q_std)])
        out.append(Measurement("pose7", value, std, t))
    return out


def compass_stream(truth: Sequence[tuple[float, Pose]], angle_std: float, seed: int) -> list[Measurement]:
    rng = np.random.default_rng(seed)
    out = []
    for t, pose in truth:
        q = quat_mul(pose.orientation, quat_exp(rng.normal(0.0, angle_std, 3)))
        out.append(Measurement("compass", q, 0.5 * angle_std, t))
    return out


def altimeter_stream(truth: Sequence[tuple[float, Pose]], std: float, seed: int) -> list[Measurement]:
    rng = np.random.default_rng(seed)
    return [Measurement("altimeter", [pose.position[2] + rng.normal(0.0, std)], std, t) for t, pose in truth]


def _unit(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def merge_streams(*streams: Sequence[Measurement]) -> list[Measurement]:
    """Time-ordered union; ties keep the order of the streams as given."""
    tagged = [(m.timestamp, i, j, m) for i, s in enumerate(streams) for j, m in enumerate(s)]
    tagged.sort(key=lambda r: r[:3])
    return [r[3] for r in tagged]


# -- export ------------------------------------------------------------------------


def fused_dataset(states: Sequence[tuple[float, EKFState]], name: str = "fused") -> TrialDataset:
    """One sample per distinct timestamp (last state wins), with covariance trace."""
    last: dict[float, EKFState] = {}
    for t, s in states:
        last[t] = s
    samples = [
        TimedSample(t, "fused", s.p.copy(), s.q.copy(), extra={"ptrace": float(np.trace(s.P))})
        for t, s in sorted(last.items())
    ]
    return TrialDataset(samples, name=name)

