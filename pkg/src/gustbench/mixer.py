"""Force-torque mixer shared by the plant and both controllers.

Wrench convention w = [f_c, tau_x, tau_y, tau_z]; per-rotor thrusts
f = [f_1..f_4] with w = A f. Saturation preserves collective thrust first,
then roll/pitch torque, and sacrifices yaw torque last.
"""

from __future__ import annotations

import numpy as np

from .vehicle import VehicleParams, Wrench


class SingularMixer(ValueError):
    """Mixer matrix is not invertible for the given parameters."""


def mixer_matrix(params: VehicleParams) -> np.ndarray:
    b = params.arm_factor
    c = params.c_tau
    return np.array(
        [
            [1.0, 1.0, 1.0, 1.0],
            [b, b, -b, -b],
            [-b, b, b, -b],
            [-c, c, -c, c],
        ]
    )


def _matrices(params: VehicleParams) -> tuple[np.ndarray, np.ndarray]:
    """(A, A^-1), cached per params instance."""
    cached = getattr(params, "_mixer_cache", None)
    if cached is not None:
        return cached
    a = mixer_matrix(params)
    if abs(np.linalg.det(a)) < 1e-12:
        raise SingularMixer("mixer matrix is singular; check arm_factor/c_tau")
    cache = (a, np.linalg.inv(a))
    object.__setattr__(params, "_mixer_cache", cache)
    return cache


def wrench_from_rotors(rotors: np.ndarray, params: VehicleParams) -> Wrench:
    a, _ = _matrices(params)
    w = a @ np.asarray(rotors, dtype=float)
    return Wrench(f_c=float(w[0]), tau=w[1:4])


def _feasible_scale(base: np.ndarray, delta: np.ndarray, f_max: float) -> float:
    """Largest s in [0, 1] with base + s*delta inside [0, f_max] per rotor.

    Assumes base itself is feasible. Returns 0.0 when no headroom exists.
    """
    s_hi = 1.0
    for bi, di in zip(base, delta):
        if di > 1e-15:
            s_hi = min(s_hi, (f_max - bi) / di)
        elif di < -1e-15:
            s_hi = min(s_hi, -bi / di)
    return max(0.0, s_hi)


def allocate(wrench: Wrench, params: VehicleParams) -> np.ndarray:
    """Invert the mixer onto per-rotor thrusts with prioritized saturation.

    Collective thrust is preserved exactly (the wrench f_c must already be
    inside [0, 4*f_rotor_max]); yaw torque is given up before roll/pitch.
    """
    a, a_inv = _matrices(params)
    f_max = params.f_rotor_max

    w = np.array([wrench.f_c, wrench.tau[0], wrench.tau[1], wrench.tau[2]])
    f = a_inv @ w
    if np.all(f >= -1e-12) and np.all(f <= f_max + 1e-12):
        return np.clip(f, 0.0, f_max)

    f_base = a_inv @ np.array([w[0], 0.0, 0.0, 0.0])  # f_c/4 each, feasible
    f_xy = a_inv @ np.array([0.0, w[1], w[2], 0.0])
    f_z = a_inv @ np.array([0.0, 0.0, 0.0, w[3]])

    with_xy = f_base + f_xy
    if np.all(with_xy >= -1e-12) and np.all(with_xy <= f_max + 1e-12):
        s_z = _feasible_scale(with_xy, f_z, f_max)
        return np.clip(with_xy + s_z * f_z, 0.0, f_max)

    s_xy = _feasible_scale(f_base, f_xy, f_max)
    return np.clip(f_base + s_xy * f_xy, 0.0, f_max)
