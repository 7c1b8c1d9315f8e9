"""Shared closed-loop harness for controller regression tests."""

from __future__ import annotations

import numpy as np

from gustbench import quat
from gustbench.mixer import wrench_from_rotors
from gustbench.vehicle import SensorRig, VehicleParams, VehicleState, step_dynamics

GATE_NORMAL = np.array([1.0, 0.0, 0.0])
GATE_CENTER = np.array([50.0, 0.0, 1.0])  # far away: steady yaw reference


def closed_loop(
    controller,
    duration: float,
    v_des_fn=lambda t: np.zeros(3),
    f_ext_fn=lambda t: np.zeros(3),
    start=(0.0, 0.0, 1.0),
    tilt0: float = 0.0,
    dt: float = 0.002,
    params: VehicleParams | None = None,
):
    """Run plant + sensors + controller; returns list of (t, p, v, omega)."""
    params = params or controller.params
    state = VehicleState.at_rest(np.array(start))
    if tilt0:
        state.q = quat.from_axis_angle(np.array([1.0, 0.0, 0.0]), tilt0)
    controller.reset(state)
    rig = SensorRig(params)
    rig.reset(state)
    rotors = np.full(4, params.hover_rotor_thrust)
    log = []
    for _ in range(int(round(duration / dt))):
        t = state.t
        new = step_dynamics(state, rotors, f_ext_fn(t), dt, params)
        sensors = rig.measure(state, new, wrench_from_rotors(rotors, params), dt)
        state = new
        rotors = controller.step(
            v_des_fn(t), GATE_NORMAL, GATE_CENTER, state, sensors, dt
        )
        log.append((state.t, state.p.copy(), state.v.copy(), state.omega.copy()))
    return log


def settle_time(log, target, tol, component=0, t_from=0.0):
    """Last time the velocity component was outside target +/- tol."""
    bad = [t for t, _, v, _ in log if t >= t_from and abs(v[component] - target) > tol]
    return max(bad) if bad else t_from


def recovery_time(log, t_step, err_tol=0.1):
    """Time after t_step until |v| stays below err_tol."""
    bad = [t for t, _, v, _ in log if t > t_step and np.linalg.norm(v) > err_tol]
    return (max(bad) - t_step) if bad else 0.0


def max_drift(log, start):
    start = np.asarray(start, dtype=float)
    return max(float(np.linalg.norm(p - start)) for _, p, _, _ in log)
