"""Scalar-first quaternion math on length-4 numpy arrays.

Conventions used throughout the package:
  - q = [w, x, y, z], unit norm, canonical sign w >= 0 after normalize().
  - q maps body-frame vectors into the world frame: v_world = rotate(q, v_body).
  - Hamilton product, right-handed frames.
"""

from __future__ import annotations

import math

import numpy as np

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])

_SMALL_ANGLE = 1e-6


def normalize(q: np.ndarray) -> np.ndarray:
    """Unit-normalize and flip to the w >= 0 canonical sign."""
    w, x, y, z = q
    n = math.sqrt(w * w + x * x + y * y + z * z)
    if n < 1e-12:
        return IDENTITY.copy()
    s = 1.0 / n
    if w < 0.0:
        s = -s
    return np.array([w * s, x * s, y * s, z * s])


def unit(q: np.ndarray) -> np.ndarray:
    """Unit-normalize preserving sign.

    Integrators must use this, not normalize(): canonical sign flips inside
    RK4 stages make stage derivatives cancel near 180-degree attitudes and
    pin the quaternion on the w = 0 surface.
    """
    w, x, y, z = q
    n = math.sqrt(w * w + x * x + y * y + z * z)
    if n < 1e-12:
        return IDENTITY.copy()
    s = 1.0 / n
    return np.array([w * s, x * s, y * s, z * s])


def multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a (x) b, renormalized."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return normalize(
        np.array(
            [
                aw * bw - ax * bx - ay * by - az * bz,
                aw * bx + ax * bw + ay * bz - az * by,
                aw * by - ax * bz + ay * bw + az * bx,
                aw * bz + ax * by - ay * bx + az * bw,
            ]
        )
    )


def conjugate(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([w, -x, -y, -z])


def rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Apply R(q) to v: body -> world for an attitude quaternion."""
    w, x, y, z = q
    vx, vy, vz = v
    # t = 2 * (q_vec x v); v' = v + w*t + q_vec x t
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    return np.array(
        [
            vx + w * tx + (y * tz - z * ty),
            vy + w * ty + (z * tx - x * tz),
            vz + w * tz + (x * ty - y * tx),
        ]
    )


def rotate_inv(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Apply R(q)^T to v: world -> body."""
    return rotate(conjugate(q), v)


def to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix R(q) with columns = body axes in world frame."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    ax = np.asarray(axis, dtype=float)
    n = math.sqrt(float(ax @ ax))
    if n < 1e-12:
        return IDENTITY.copy()
    half = 0.5 * angle
    s = math.sin(half) / n
    return normalize(np.array([math.cos(half), ax[0] * s, ax[1] * s, ax[2] * s]))


def log(q: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle) of q, angle in [0, pi].

    Below _SMALL_ANGLE the first-order series 2*q_vec is used.
    """
    w, x, y, z = q
    if w < 0.0:
        w, x, y, z = -w, -x, -y, -z
    s = math.sqrt(x * x + y * y + z * z)
    angle = 2.0 * math.atan2(s, w)
    if angle < _SMALL_ANGLE:
        return np.array([2.0 * x, 2.0 * y, 2.0 * z])
    k = angle / s
    return np.array([x * k, y * k, z * k])


def exp(v: np.ndarray) -> np.ndarray:
    """Inverse of log(): rotation vector -> unit quaternion."""
    vx, vy, vz = v
    angle = math.sqrt(vx * vx + vy * vy + vz * vz)
    if angle < _SMALL_ANGLE:
        return normalize(np.array([1.0, 0.5 * vx, 0.5 * vy, 0.5 * vz]))
    half = 0.5 * angle
    s = math.sin(half) / angle
    return normalize(np.array([math.cos(half), vx * s, vy * s, vz * s]))


def derivative(q: np.ndarray, omega_body: np.ndarray) -> np.ndarray:
    """q_dot = 0.5 * q (x) [0, omega_body] (no normalization)."""
    w, x, y, z = q
    ox, oy, oz = omega_body
    return 0.5 * np.array(
        [
            -x * ox - y * oy - z * oz,
            w * ox + y * oz - z * oy,
            w * oy - x * oz + z * ox,
            w * oz + x * oy - y * ox,
        ]
    )


def to_euler_zyx(q: np.ndarray) -> np.ndarray:
    """Roll/pitch/yaw (x-y-z body axes, ZYX order), each in (-pi, pi]."""
    w, x, y, z = q
    roll = math.atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))
    sp = 2.0 * (w * y - z * x)
    pitch = math.asin(max(-1.0, min(1.0, sp)))
    yaw = math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))
    return np.array([roll, pitch, yaw])


def from_euler_zyx(roll: float, pitch: float, yaw: float) -> np.ndarray:
    qz = from_axis_angle(np.array([0.0, 0.0, 1.0]), yaw)
    qy = from_axis_angle(np.array([0.0, 1.0, 0.0]), pitch)
    qx = from_axis_angle(np.array([1.0, 0.0, 0.0]), roll)
    return multiply(multiply(qz, qy), qx)
