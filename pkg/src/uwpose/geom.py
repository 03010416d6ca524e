"""Quaternion and pose algebra.

Quaternions are numpy arrays ordered ``(w, x, y, z)`` with the scalar part
first, everywhere in the package including file formats. All functions
broadcast over leading axes, so a ``(N, 4)`` array is a batch of N
quaternions.

A pose orientation maps camera-frame vectors into the world frame. The
camera frame is x forward, y left, z up, so a level camera heading ``yaw``
radians from the world x axis has orientation ``yaw_quat(yaw)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from uwpose.errors import ZeroNormQuaternion

EPS_NORM = 1e-12
SLERP_LINEAR_THRESHOLD = 1e-6

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def quat_mul(a, b) -> np.ndarray:
    """Hamilton product ``a ⊗ b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_conj(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_normalize(q, eps: float = EPS_NORM) -> np.ndarray:
    """Scale ``q`` to unit norm.

    Raises ZeroNormQuaternion if any norm is at or below ``eps``.
    """
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(n <= eps) or not np.all(np.isfinite(n)):
        raise ZeroNormQuaternion(f"cannot normalize quaternion with norm {np.min(n):.3g}")
    return q / n


def quat_difference_scalar(q, q_hat) -> np.ndarray:
    """Scalar part ``r`` of ``q ⊗ (q_hat/|q_hat|)*``, both inputs normalized."""
    q = quat_normalize(q)
    q_hat = quat_normalize(q_hat)
    # scalar part of a ⊗ b* is the 4-D dot product
    return np.sum(q * q_hat, axis=-1)


def angular_distance(q, q_hat):
    """Geodesic angle in radians between two rotations, in ``[0, pi]``.

    Uses ``|r|`` so that ``q`` and ``-q`` are treated as the same rotation.
    """
    dq = quat_mul(quat_normalize(q), quat_conj(quat_normalize(q_hat)))
    # equals 2 arccos(|r|); the atan2 form keeps full precision near r = 1
    out = 2.0 * np.arctan2(np.linalg.norm(dq[..., 1:], axis=-1), np.abs(dq[..., 0]))
    return float(out) if np.ndim(out) == 0 else out


def angular_distance_approx(q, q_hat):
    """Training-time surrogate ``(pi/2)(1 - |r|)`` for the geodesic angle.

    This is not the Taylor expansion of ``2 arccos r`` (that would be
    ``2 sqrt(2(1 - r))`` near ``r = 1``); it is kept exactly in this form.
    It vanishes at ``|r| = 1`` and equals ``pi/2`` at ``r = 0``.
    """
    r = np.abs(quat_difference_scalar(q, q_hat))
    out = 0.5 * np.pi * (1.0 - np.clip(r, -1.0, 1.0))
    return float(out) if np.ndim(out) == 0 else out


def slerp(a, b, t: float) -> np.ndarray:
    """Shortest-arc spherical interpolation between unit quaternions."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    dot = float(np.dot(a, b))
    if dot < 0.0:
        b = -b
        dot = -dot
    if dot > 1.0 - SLERP_LINEAR_THRESHOLD:
        return quat_normalize(a + t * (b - a))
    omega = np.arccos(min(dot, 1.0))
    so = np.sin(omega)
    out = (np.sin((1.0 - t) * omega) / so) * a + (np.sin(t * omega) / so) * b
    return quat_normalize(out)


def quat_from_axis_angle(axis, angle) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
    half = 0.5 * np.asarray(angle, dtype=float)[..., None]
    return np.concatenate([np.cos(half), np.sin(half) * axis], axis=-1)


def quat_exp(rotvec) -> np.ndarray:
    """Unit quaternion for a rotation vector (axis times angle)."""
    rotvec = np.asarray(rotvec, dtype=float)
    theta = np.linalg.norm(rotvec, axis=-1, keepdims=True)
    half = 0.5 * theta
    # sin(theta/2)/theta, series below 1e-8 where the quotient loses precision
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(theta > 1e-8, np.sin(half) / np.where(theta > 0, theta, 1.0), 0.5 - theta**2 / 48.0)
    return np.concatenate([np.cos(half), k * rotvec], axis=-1)


def quat_log(q) -> np.ndarray:
    """Rotation vector of a unit quaternion, taken on the ``w >= 0`` hemisphere."""
    q = quat_normalize(q)
    q = np.where(q[..., :1] < 0, -q, q)
    v = q[..., 1:]
    s = np.linalg.norm(v, axis=-1, keepdims=True)
    angle = 2.0 * np.arctan2(s, q[..., :1])
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(s > 1e-12, angle / np.where(s > 0, s, 1.0), 2.0)
    return k * v


def rotate(q, v) -> np.ndarray:
    """Rotate 3-vectors ``v`` by unit quaternion ``q``."""
    return np.asarray(v, dtype=float) @ quat_to_matrix(q).T


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = quat_normalize(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_left_matrix(q) -> np.ndarray:
    """Matrix ``L(q)`` with ``q ⊗ p = L(q) p``."""
    w, x, y, z = np.asarray(q, dtype=float)
    return np.array(
        [
            [w, -x, -y, -z],
            [x, w, -z, y],
            [y, z, w, -x],
            [z, -y, x, w],
        ]
    )


def quat_right_matrix(p) -> np.ndarray:
    """Matrix ``R(p)`` with ``q ⊗ p = R(p) q``."""
    w, x, y, z = np.asarray(p, dtype=float)
    return np.array(
        [
            [w, -x, -y, -z],
            [x, w, z, -y],
            [y, -z, w, x],
            [z, y, -x, w],
        ]
    )


def yaw_quat(yaw: float) -> np.ndarray:
    return np.array([np.cos(0.5 * yaw), 0.0, 0.0, np.sin(0.5 * yaw)])


def yaw_of(q) -> float:
    """Heading of the camera forward axis projected on the horizontal plane."""
    fwd = quat_to_matrix(q)[:, 0]
    return float(np.arctan2(fwd[1], fwd[0]))


def look_at(position, target, level: bool = True) -> np.ndarray:
    """Orientation whose forward (x) axis points from ``position`` to ``target``.

    With ``level`` the camera keeps zero pitch and roll and only the
    horizontal bearing to the target is used.
    """
    d = np.asarray(target, dtype=float) - np.asarray(position, dtype=float)
    yaw = np.arctan2(d[1], d[0])
    q = yaw_quat(yaw)
    if level:
        return q
    pitch = -np.arctan2(d[2], np.hypot(d[0], d[1]))
    return quat_mul(q, quat_from_axis_angle([0.0, 1.0, 0.0], pitch))


def canonical(q) -> np.ndarray:
    """Sign-flip to the ``w >= 0`` hemisphere."""
    q = np.asarray(q, dtype=float)
    return np.where(q[..., :1] < 0, -q, q)


@dataclass(frozen=True, eq=False)
class Pose:
    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "orientation", np.asarray(self.orientation, dtype=float).reshape(4))

    @classmethod
    def from_vector(cls, v) -> "Pose":
        v = np.asarray(v, dtype=float)
        return cls(v[:3], v[3:7])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.orientation])

    def normalized(self) -> "Pose":
        return Pose(self.position, quat_normalize(self.orientation))

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return np.array_equal(self.position, other.position) and np.array_equal(
            self.orientation, other.orientation
        )

    def __repr__(self):
        p = ", ".join(f"{c:.4g}" for c in self.position)
        q = ", ".join(f"{c:.4g}" for c in self.orientation)
        return f"Pose(p=[{p}], q=[{q}])"
