"""Rigid-body quadrotor plant: parameters, state, RK4 integration, sensor synthesis.

World frame is z-up with gravity (0, 0, -9.81) m/s^2. Thrust acts along the
body z-axis. Torque is produced by the force-torque mixer in mixer.py, so the
plant and the allocator share one actuation model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import quat

GRAVITY = np.array([0.0, 0.0, -9.81])
E3 = np.array([0.0, 0.0, 1.0])


class NonFiniteState(RuntimeError):
    """Raised when integration produces NaN/inf; the episode must abort."""


@dataclass
class VehicleParams:
    """Physical constants of the simulated airframe (50 g class by default)."""

    mass: float = 0.05
    inertia: np.ndarray = field(
        default_factory=lambda: np.array([1.66e-5, 1.66e-5, 2.93e-5])
    )
    arm_length: float = 0.046
    arm_factor: float | None = None  # b in the mixer; defaults to l/sqrt(2)
    c_tau: float = 0.005964552
    f_rotor_max: float = 0.15
    radius: float = 0.06

    def __post_init__(self) -> None:
        self.inertia = np.asarray(self.inertia, dtype=float)
        if self.arm_factor is None:
            self.arm_factor = self.arm_length / math.sqrt(2.0)
        if self.mass <= 0.0:
            raise ValueError("mass must be positive")
        if np.any(self.inertia <= 0.0):
            raise ValueError("inertia diagonal must be positive")
        if abs(self.arm_factor - self.arm_length / math.sqrt(2.0)) > 1e-4:
            raise ValueError("arm_factor must equal arm_length/sqrt(2) within 1e-4")
        if self.f_rotor_max <= self.mass * 9.81 / 4.0:
            raise ValueError("f_rotor_max must exceed hover thrust per rotor")

    @property
    def hover_rotor_thrust(self) -> float:
        return self.mass * 9.81 / 4.0


@dataclass
class VehicleState:
    """Full kinematic state; q maps body to world."""

    p: np.ndarray
    v: np.ndarray
    q: np.ndarray
    omega: np.ndarray
    t: float = 0.0

    @classmethod
    def at_rest(cls, p, yaw: float = 0.0, t: float = 0.0) -> "VehicleState":
        return cls(
            p=np.asarray(p, dtype=float).copy(),
            v=np.zeros(3),
            q=quat.from_axis_angle(np.array([0.0, 0.0, 1.0]), yaw),
            omega=np.zeros(3),
            t=t,
        )

    def copy(self) -> "VehicleState":
        return VehicleState(
            self.p.copy(), self.v.copy(), self.q.copy(), self.omega.copy(), self.t
        )

    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.p))
            and np.all(np.isfinite(self.v))
            and np.all(np.isfinite(self.q))
            and np.all(np.isfinite(self.omega))
        )


@dataclass
class Wrench:
    """Collective thrust (N) plus body torque (N*m)."""

    f_c: float
    tau: np.ndarray

    @classmethod
    def hover(cls, params: VehicleParams) -> "Wrench":
        return cls(f_c=params.mass * 9.81, tau=np.zeros(3))


@dataclass
class SensorFrame:
    """One controller-rate sample of the synthesized onboard signals."""

    f_s: np.ndarray  # specific force, body frame, m/s^2
    omega_meas: np.ndarray  # rad/s, body frame
    omega_dot_raw: np.ndarray  # backward difference of omega_meas, rad/s^2
    tau_bz_applied: np.ndarray  # applied specific thrust, world frame, m/s^2
    mu_applied: np.ndarray  # applied torque, body frame, N*m


def step_dynamics(
    state: VehicleState,
    rotors: np.ndarray,
    f_ext: np.ndarray,
    dt: float,
    params: VehicleParams,
) -> VehicleState:
    """Advance the rigid body one fixed RK4 step under constant rotor thrusts.

    f_ext is an additional world-frame force (wind). Raises NonFiniteState on
    numeric blow-up.
    """
    if not 0.0 < dt <= 0.01:
        raise ValueError("dt must lie in (0, 0.01] s")
    rotors = np.asarray(rotors, dtype=float)
    if rotors.shape != (4,):
        raise ValueError("rotors must be a length-4 thrust vector")
    if np.any(rotors < -1e-9) or np.any(rotors > params.f_rotor_max + 1e-9):
        raise ValueError("rotor thrusts outside [0, f_rotor_max]")

    from .mixer import wrench_from_rotors  # local import avoids a cycle

    wrench = wrench_from_rotors(rotors, params)
    thrust = wrench.f_c
    tau = wrench.tau
    inv_m = 1.0 / params.mass
    jx, jy, jz = params.inertia

    def deriv(p, v, q, om):
        qn = quat.unit(q)  # sign-preserving: see quat.unit

        a = quat.rotate(qn, E3) * (thrust * inv_m) + GRAVITY + f_ext * inv_m
        # Euler equations with diagonal inertia
        ox, oy, oz = om
        om_dot = np.array(
            [
                (tau[0] - (jz - jy) * oy * oz) / jx,
                (tau[1] - (jx - jz) * oz * ox) / jy,
                (tau[2] - (jy - jx) * ox * oy) / jz,
            ]
        )
        return v, a, quat.derivative(qn, om), om_dot

    p0, v0, q0, w0 = state.p, state.v, state.q, state.omega
    k1 = deriv(p0, v0, q0, w0)
    h = 0.5 * dt
    k2 = deriv(p0 + h * k1[0], v0 + h * k1[1], q0 + h * k1[2], w0 + h * k1[3])
    k3 = deriv(p0 + h * k2[0], v0 + h * k2[1], q0 + h * k2[2], w0 + h * k2[3])
    k4 = deriv(
        p0 + dt * k3[0], v0 + dt * k3[1], q0 + dt * k3[2], w0 + dt * k3[3]
    )
    s = dt / 6.0
    new = VehicleState(
        p=p0 + s * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        v=v0 + s * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        q=quat.normalize(q0 + s * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])),
        omega=w0 + s * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]),
        t=state.t + dt,
    )
    if not new.is_finite():
        raise NonFiniteState(f"state diverged at t={state.t:.4f}")
    return new


@dataclass
class SensorNoise:
    """Per-channel Gaussian noise sigmas; all zero by default."""

    accel: float = 0.0
    gyro: float = 0.0


class SensorRig:
    """Synthesizes the sensor frame the controller consumes.

    Keeps the previous gyro sample so angular acceleration is the backward
    difference of the measured rate at the controller period.
    """

    def __init__(self, params: VehicleParams, noise: SensorNoise | None = None,
                 rng: np.random.Generator | None = None):
        self.params = params
        self.noise = noise or SensorNoise()
        self.rng = rng
        self._prev_omega_meas: np.ndarray | None = None

    def reset(self, state: VehicleState) -> None:
        self._prev_omega_meas = state.omega.copy()

    def measure(
        self,
        prev: VehicleState,
        curr: VehicleState,
        applied: Wrench,
        dt: float,
    ) -> SensorFrame:
        v_dot = (curr.v - prev.v) / dt
        f_s = quat.rotate_inv(curr.q, v_dot - GRAVITY)
        omega_meas = curr.omega.copy()
        if self.rng is not None and (self.noise.accel > 0.0 or self.noise.gyro > 0.0):
            f_s = f_s + self.noise.accel * self.rng.standard_normal(3)
            omega_meas = omega_meas + self.noise.gyro * self.rng.standard_normal(3)
        if self._prev_omega_meas is None:
            self._prev_omega_meas = omega_meas.copy()
        omega_dot_raw = (omega_meas - self._prev_omega_meas) / dt
        self._prev_omega_meas = omega_meas.copy()
        tau_bz_applied = quat.rotate(curr.q, E3) * (applied.f_c / self.params.mass)
        return SensorFrame(
            f_s=f_s,
            omega_meas=omega_meas,
            omega_dot_raw=omega_dot_raw,
            tau_bz_applied=tau_bz_applied,
            mu_applied=applied.tau.copy(),
        )
