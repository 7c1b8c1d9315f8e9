"""Geometric incremental-inversion velocity tracker.

Cascade per control tick: velocity PI -> incremental specific-thrust update ->
tilt/yaw attitude construction -> incremental torque -> mixer allocation.
Both increments are taken against filtered measurements of the previously
applied command, which is what gives the loop its disturbance rejection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import quat
from .filters import FilterBank, FilterCutoffs, FilteredSignals
from .mixer import allocate
from .vehicle import E3, SensorFrame, VehicleParams, VehicleState, Wrench

_HOVER_TAU = np.array([0.0, 0.0, 9.81])


class DegenerateThrust(ValueError):
    """Commanded specific thrust too small to define a direction."""


class DegenerateNormal(ValueError):
    """Gate normal has no horizontal component; yaw reference undefined."""


@dataclass
class ControllerGains:
    """Velocity/attitude loop constants; defaults are the flight-tuned set.

    With the default inertia the inner-loop gains drive the torque command
    into its clamp for attitude errors above ~1e-8 rad, so the inner loop
    behaves like a sliding-mode law bounded by torque_sat. That is stable here
    (small bounded chatter); `inner_gain_scale` rescales K_xi and K_omega for
    airframes where it is not. 1.0 means the literal defaults.
    """

    k_v: np.ndarray = field(default_factory=lambda: np.array([3.519, 3.519, 31.481]))
    k_i: np.ndarray = field(default_factory=lambda: np.array([0.037, 0.037, 5.556]))
    k_xi: np.ndarray = field(
        default_factory=lambda: np.array([4.643e9, 4.643e9, 46.08e9])
    )
    k_omega: np.ndarray = field(
        default_factory=lambda: np.array([7.857e8, 7.857e8, 5.530e8])
    )
    alpha_outer: float = 1.0
    alpha_inner: float = 1.0
    torque_sat: float = 9.49e-4
    cutoffs: FilterCutoffs = field(default_factory=FilterCutoffs)
    inner_gain_scale: float = 1.0
    integral_limit: float = 1.0  # anti-windup clamp per axis, m
    # Ceiling on collective thrust as a fraction of 4*f_rotor_max. At 1.0 a
    # railed climb pins every rotor and leaves zero torque authority (the
    # vehicle tumbles); 0.95 keeps roll/pitch alive through saturation.
    thrust_margin: float = 0.95
    # Floor on the commanded specific thrust's vertical component (m/s^2).
    # Large downward velocity errors would otherwise flip the commanded
    # thrust axis below the horizon, i.e. demand an inverted vehicle; the
    # airframe cannot accelerate down faster than gravity regardless.
    min_specific_thrust_z: float = 1.0

    def __post_init__(self) -> None:
        self.k_v = np.asarray(self.k_v, dtype=float)
        self.k_i = np.asarray(self.k_i, dtype=float)
        self.k_xi = np.asarray(self.k_xi, dtype=float)
        self.k_omega = np.asarray(self.k_omega, dtype=float)
        for name in ("k_v", "k_i", "k_xi", "k_omega"):
            if np.any(getattr(self, name) < 0.0):
                raise ValueError(f"{name} diagonal must be non-negative")
        if not 0.0 <= self.alpha_outer <= 1.0 or not 0.0 <= self.alpha_inner <= 1.0:
            raise ValueError("blending factors must lie in [0, 1]")


@dataclass
class ControllerState:
    """Mutable per-vehicle memory of the cascade."""

    bank: FilterBank
    integral: np.ndarray = field(default_factory=lambda: np.zeros(3))
    last_b_z_c: np.ndarray = field(default_factory=lambda: E3.copy())
    last_psi_ref: float = 0.0
    last_tau_bz_c: np.ndarray = field(default_factory=lambda: _HOVER_TAU.copy())
    last_mu_c: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass
class AttitudeCommand:
    tilt: np.ndarray  # body-frame quaternion aligning e3 with the thrust axis
    yaw: np.ndarray  # body-z yaw correction quaternion
    combined: np.ndarray  # tilt (x) yaw
    b_z_c: np.ndarray
    psi_ref: float


def outer_loop(
    v_des: np.ndarray,
    v_meas: np.ndarray,
    filtered: FilteredSignals,
    gains: ControllerGains,
    state: ControllerState,
    dt: float,
    params: VehicleParams,
) -> tuple[np.ndarray, float, np.ndarray]:
    """Incremental specific-thrust update from velocity tracking.

    Returns (tau_bz_c, f_c, b_z_c). Gravity needs no explicit term: the
    feedback signals are the kinematic acceleration and the applied specific
    thrust, so the hover equilibrium carries g inside tau_bz_f.
    """
    e_v = v_des - v_meas
    state.integral = np.clip(
        state.integral + e_v * dt, -gains.integral_limit, gains.integral_limit
    )
    a_c = gains.k_v * e_v + gains.k_i * state.integral
    tau_bz_c = filtered.tau_bz_f + gains.alpha_outer * (a_c - filtered.a_f)
    if tau_bz_c[2] < gains.min_specific_thrust_z:
        tau_bz_c = tau_bz_c.copy()
        tau_bz_c[2] = gains.min_specific_thrust_z
    tau_c = float(np.linalg.norm(tau_bz_c))
    if tau_c < 0.1:
        # DegenerateThrust: keep pointing where we last pointed
        b_z_c = state.last_b_z_c.copy()
    else:
        b_z_c = tau_bz_c / tau_c
        state.last_b_z_c = b_z_c.copy()
    f_ceiling = gains.thrust_margin * 4.0 * params.f_rotor_max
    f_c = min(max(params.mass * tau_c, 0.0), f_ceiling)
    state.last_tau_bz_c = tau_bz_c.copy()
    return tau_bz_c, f_c, b_z_c


def tilt_quaternion(q_cur: np.ndarray, b_z_c: np.ndarray) -> np.ndarray:
    """Minimum body-frame rotation taking e3 onto the commanded thrust axis."""
    v_b = quat.rotate_inv(q_cur, b_z_c)
    w = 1.0 + float(v_b[2])  # 1 + e3 . v_b
    if w < 1e-8:
        return np.array([0.0, 1.0, 0.0, 0.0])  # antiparallel: pitch flip
    axis = np.array([-v_b[1], v_b[0], 0.0])  # e3 x v_b
    return quat.normalize(np.array([w, axis[0], axis[1], axis[2]]))


def yaw_reference(
    n_gate: np.ndarray, p_gate: np.ndarray, p_drone: np.ndarray
) -> float:
    """Heading toward the gate: horizontal projection of the resolved normal.

    The normal's sign ambiguity is removed by flipping it to point from the
    drone toward the gate.
    """
    n = np.asarray(n_gate, dtype=float)
    if math.hypot(n[0], n[1]) <= 1e-6:
        raise DegenerateNormal("gate normal is vertical")
    if float(n @ (p_gate - p_drone)) < 0.0:
        n = -n
    return math.atan2(n[1], n[0])


def yaw_quaternion(
    q_cur: np.ndarray, xi_tilt: np.ndarray, psi_ref: float
) -> tuple[np.ndarray, np.ndarray]:
    """Body-z yaw correction applied after the tilt rotation."""
    q_int = quat.multiply(q_cur, xi_tilt)
    n_ref = np.array([math.sin(psi_ref), -math.cos(psi_ref), 0.0])
    n_bar = quat.rotate_inv(q_int, n_ref)
    psi = math.atan2(n_bar[0], -n_bar[1])
    xi_psi = np.array([math.cos(0.5 * psi), 0.0, 0.0, math.sin(0.5 * psi)])
    return xi_psi, quat.multiply(xi_tilt, xi_psi)


def inner_loop(
    xi_c: np.ndarray,
    filtered: FilteredSignals,
    gains: ControllerGains,
    params: VehicleParams,
) -> np.ndarray:
    """Incremental torque from the attitude error log map and rate feedback."""
    xi_e = quat.log(xi_c)
    s = gains.inner_gain_scale
    omega_dot_c = s * gains.k_xi * xi_e - s * gains.k_omega * filtered.omega_f
    mu_c = filtered.mu_f + gains.alpha_inner * params.inertia * (
        omega_dot_c - filtered.omega_dot_f
    )
    return np.clip(mu_c, -gains.torque_sat, gains.torque_sat)


class GeometricIndiController:
    """Full cascade with per-vehicle state; one instance per vehicle."""

    name = "indi"

    def __init__(
        self,
        params: VehicleParams,
        gains: ControllerGains | None = None,
        f_s: float = 500.0,
    ):
        self.params = params
        self.gains = gains or ControllerGains()
        self.f_s = f_s
        self.state = ControllerState(bank=FilterBank(f_s, self.gains.cutoffs))
        self.reset(None)

    def reset(self, vehicle: VehicleState | None) -> None:
        """Warm-start the memory at the hover equilibrium."""
        st = self.state
        st.integral = np.zeros(3)
        st.last_b_z_c = E3.copy()
        st.last_psi_ref = 0.0
        st.last_tau_bz_c = _HOVER_TAU.copy()
        st.last_mu_c = np.zeros(3)
        omega0 = vehicle.omega.copy() if vehicle is not None else np.zeros(3)
        st.bank.reset(
            FilteredSignals(
                a_f=np.zeros(3),
                omega_f=omega0,
                omega_dot_f=np.zeros(3),
                tau_bz_f=_HOVER_TAU.copy(),
                mu_f=np.zeros(3),
            )
        )

    def step(
        self,
        v_des: np.ndarray,
        gate_normal: np.ndarray,
        gate_center: np.ndarray,
        vehicle: VehicleState,
        sensors: SensorFrame,
        dt: float,
    ) -> np.ndarray:
        """One control tick; returns per-rotor thrusts."""
        st = self.state
        filtered = st.bank.update(sensors, vehicle.q)
        try:
            tau_bz_c, f_c, b_z_c = outer_loop(
                v_des, vehicle.v, filtered, self.gains, st, dt, self.params
            )
            try:
                psi_ref = yaw_reference(gate_normal, gate_center, vehicle.p)
                st.last_psi_ref = psi_ref
            except DegenerateNormal:
                psi_ref = st.last_psi_ref
            xi_tilt = tilt_quaternion(vehicle.q, b_z_c)
            _, xi_c = yaw_quaternion(vehicle.q, xi_tilt, psi_ref)
            mu_c = inner_loop(xi_c, filtered, self.gains, self.params)
            st.last_mu_c = mu_c.copy()
            wrench = Wrench(f_c=f_c, tau=mu_c)
        except (ValueError, FloatingPointError):
            wrench = Wrench.hover(self.params)  # safe hold on any cascade error
        return allocate(wrench, self.params)

    def attitude_command(
        self, q_cur: np.ndarray, b_z_c: np.ndarray, psi_ref: float
    ) -> AttitudeCommand:
        """Attitude construction alone; used by analysis and tests."""
        xi_tilt = tilt_quaternion(q_cur, b_z_c)
        xi_psi, xi_c = yaw_quaternion(q_cur, xi_tilt, psi_ref)
        return AttitudeCommand(
            tilt=xi_tilt, yaw=xi_psi, combined=xi_c, b_z_c=b_z_c, psi_ref=psi_ref
        )
