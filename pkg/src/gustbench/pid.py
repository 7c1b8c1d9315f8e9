"""Cascaded PID velocity tracker used as the comparison controller.

Structure mirrors the stock firmware of small quadrotors: velocity PID to a
desired acceleration, small-angle mapping to tilt angles and thrust, attitude
P to body-rate setpoints, rate PI to torque, shared mixer. Gains are SI-unit
ports of the public firmware defaults (the firmware's degree/PWM scalings do
not carry over bit-exactly).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import quat
from .indi import DegenerateNormal, yaw_reference
from .mixer import allocate
from .vehicle import SensorFrame, VehicleParams, VehicleState, Wrench

_G = 9.81


@dataclass
class PidGains:
    vel_kp: np.ndarray = field(default_factory=lambda: np.array([4.0, 4.0, 10.0]))
    vel_ki: np.ndarray = field(default_factory=lambda: np.array([1.0, 1.0, 5.0]))
    vel_kd: np.ndarray = field(default_factory=lambda: np.zeros(3))
    att_kp: np.ndarray = field(default_factory=lambda: np.array([6.0, 6.0, 6.0]))
    rate_kp: np.ndarray = field(default_factory=lambda: np.array([30.0, 30.0, 15.0]))
    rate_ki: np.ndarray = field(default_factory=lambda: np.array([15.0, 15.0, 8.0]))
    rate_kd: np.ndarray = field(default_factory=lambda: np.zeros(3))
    tilt_max: float = 0.35  # rad
    vel_int_limit: float = 1.0  # m
    rate_int_limit: float = 2.0  # rad/s * s
    torque_sat: float = 9.49e-4
    thrust_margin: float = 0.95  # same torque-headroom reserve as the INDI loop

    def __post_init__(self) -> None:
        for name in ("vel_kp", "vel_ki", "vel_kd", "att_kp", "rate_kp", "rate_ki", "rate_kd"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if np.any(arr < 0.0):
                raise ValueError(f"{name} must be non-negative")
            setattr(self, name, arr)


class CascadedPidController:
    """Same step interface as the incremental controller."""

    name = "pid"

    def __init__(self, params: VehicleParams, gains: PidGains | None = None,
                 f_s: float = 500.0):
        self.params = params
        self.gains = gains or PidGains()
        self.f_s = f_s
        self.reset(None)

    def reset(self, vehicle: VehicleState | None) -> None:
        self._vel_int = np.zeros(3)
        self._rate_int = np.zeros(3)
        self._prev_e_v = np.zeros(3)
        self._prev_e_rate = np.zeros(3)
        self._last_psi_ref = 0.0

    def step(
        self,
        v_des: np.ndarray,
        gate_normal: np.ndarray,
        gate_center: np.ndarray,
        vehicle: VehicleState,
        sensors: SensorFrame,
        dt: float,
    ) -> np.ndarray:
        g = self.gains
        e_v = v_des - vehicle.v
        self._vel_int = np.clip(
            self._vel_int + e_v * dt, -g.vel_int_limit, g.vel_int_limit
        )
        a_des = (
            g.vel_kp * e_v
            + g.vel_ki * self._vel_int
            + g.vel_kd * (e_v - self._prev_e_v) / dt
        )
        self._prev_e_v = e_v

        try:
            psi_ref = yaw_reference(gate_normal, gate_center, vehicle.p)
            self._last_psi_ref = psi_ref
        except DegenerateNormal:
            psi_ref = self._last_psi_ref

        # small-angle mapping of horizontal acceleration to tilt
        cp, sp = math.cos(psi_ref), math.sin(psi_ref)
        pitch_des = (a_des[0] * cp + a_des[1] * sp) / _G
        roll_des = (a_des[0] * sp - a_des[1] * cp) / _G
        pitch_des = max(-g.tilt_max, min(g.tilt_max, pitch_des))
        roll_des = max(-g.tilt_max, min(g.tilt_max, roll_des))
        f_c = self.params.mass * (_G + a_des[2])
        f_c = min(max(f_c, 0.0), g.thrust_margin * 4.0 * self.params.f_rotor_max)

        rpy = quat.to_euler_zyx(vehicle.q)
        e_att = np.array(
            [
                roll_des - rpy[0],
                pitch_des - rpy[1],
                _wrap_pi(psi_ref - rpy[2]),
            ]
        )
        rate_sp = g.att_kp * e_att
        e_rate = rate_sp - sensors.omega_meas
        self._rate_int = np.clip(
            self._rate_int + e_rate * dt, -g.rate_int_limit, g.rate_int_limit
        )
        tau = self.params.inertia * (
            g.rate_kp * e_rate
            + g.rate_ki * self._rate_int
            + g.rate_kd * (e_rate - self._prev_e_rate) / dt
        )
        self._prev_e_rate = e_rate
        tau = np.clip(tau, -g.torque_sat, g.torque_sat)
        return allocate(Wrench(f_c=f_c, tau=tau), self.params)


def _wrap_pi(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi
