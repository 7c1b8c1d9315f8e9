import math

import numpy as np
import pytest

from gustbench import quat
from gustbench.mixer import mixer_matrix, wrench_from_rotors
from gustbench.vehicle import (
    GRAVITY,
    NonFiniteState,
    SensorRig,
    VehicleParams,
    VehicleState,
    Wrench,
    step_dynamics,
)

DT = 0.002


@pytest.fixture
def params():
    return VehicleParams()


def hover_rotors(params):
    return np.full(4, params.hover_rotor_thrust)


def test_params_validation():
    with pytest.raises(ValueError):
        VehicleParams(mass=-1.0)
    with pytest.raises(ValueError):
        VehicleParams(inertia=np.array([1e-5, -1e-5, 1e-5]))
    with pytest.raises(ValueError):
        VehicleParams(arm_factor=0.05)  # inconsistent with l/sqrt(2)
    with pytest.raises(ValueError):
        VehicleParams(f_rotor_max=0.1)  # below hover thrust per rotor


def test_hover_is_equilibrium(params):
    st = VehicleState.at_rest([0.0, 0.0, 1.0])
    new = step_dynamics(st, hover_rotors(params), np.zeros(3), DT, params)
    assert np.abs(new.v).max() < 1e-9
    assert np.abs(new.p - st.p).max() < 1e-9
    assert np.abs(new.omega).max() < 1e-12


def test_free_fall_matches_ballistics(params):
    st = VehicleState.at_rest([0.0, 0.0, 10.0])
    for _ in range(int(1.0 / DT)):
        st = step_dynamics(st, np.zeros(4), np.zeros(3), DT, params)
    assert st.v[2] == pytest.approx(-9.81, abs=1e-3)
    assert st.p[2] == pytest.approx(10.0 - 0.5 * 9.81, abs=1e-3)


def test_principal_axis_spin_is_constant(params):
    st = VehicleState.at_rest([0.0, 0.0, 1.0])
    st.omega = np.array([1.0, 0.0, 0.0])
    rotors = hover_rotors(params)  # zero torque, nonzero thrust
    for _ in range(500):
        st = step_dynamics(st, rotors, np.zeros(3), DT, params)
    np.testing.assert_allclose(st.omega, [1.0, 0.0, 0.0], atol=1e-9)


def test_external_force_accelerates(params):
    st = VehicleState.at_rest([0.0, 0.0, 1.0])
    f = np.array([0.05, 0.0, 0.0])
    for _ in range(500):
        st = step_dynamics(st, hover_rotors(params), f, DT, params)
    assert st.v[0] == pytest.approx(0.05 / params.mass * 1.0, rel=1e-6)


def test_ballistic_energy_conservation(params):
    # RK4 on ballistic flight: relative energy error < 1e-6 per step over 1000
    st = VehicleState.at_rest([0.0, 0.0, 50.0])
    st.v = np.array([2.0, 1.0, 3.0])
    m = params.mass

    def energy(s):
        return 0.5 * m * float(s.v @ s.v) + m * 9.81 * s.p[2]

    e0 = energy(st)
    prev = e0
    for _ in range(1000):
        st = step_dynamics(st, np.zeros(4), np.zeros(3), DT, params)
        e = energy(st)
        assert abs(e - prev) / abs(e0) < 1e-6
        prev = e


def test_quaternion_norm_drift(params):
    st = VehicleState.at_rest([0.0, 0.0, 1.0])
    st.omega = np.array([3.0, -2.0, 4.0])
    for _ in range(1000):
        st = step_dynamics(st, hover_rotors(params), np.zeros(3), DT, params)
        assert abs(np.linalg.norm(st.q) - 1.0) < 1e-9


def test_determinism_bit_identical(params):
    def run():
        st = VehicleState.at_rest([0.1, -0.2, 1.0])
        st.omega = np.array([0.3, 0.1, -0.2])
        rotors = np.array([0.12, 0.125, 0.121, 0.124])
        out = []
        for _ in range(200):
            st = step_dynamics(st, rotors, np.array([0.01, 0.0, 0.0]), DT, params)
            out.append((st.p.tobytes(), st.v.tobytes(), st.q.tobytes(), st.omega.tobytes()))
        return out

    assert run() == run()


def test_dt_and_rotor_validation(params):
    st = VehicleState.at_rest([0.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        step_dynamics(st, hover_rotors(params), np.zeros(3), 0.02, params)
    with pytest.raises(ValueError):
        step_dynamics(st, np.full(4, 1.0), np.zeros(3), DT, params)


def test_non_finite_detection(params):
    st = VehicleState.at_rest([0.0, 0.0, 1.0])
    st.v = np.array([np.inf, 0.0, 0.0])
    with pytest.raises(NonFiniteState):
        step_dynamics(st, hover_rotors(params), np.zeros(3), DT, params)


def test_mixer_consistency_with_plant(params):
    # torque fed to the plant equals A @ f rows 2-4 for admissible thrusts
    rng = np.random.default_rng(3)
    a = mixer_matrix(params)
    for _ in range(50):
        f = rng.uniform(0.0, params.f_rotor_max, 4)
        w = wrench_from_rotors(f, params)
        expect = a @ f
        assert w.f_c == pytest.approx(expect[0], abs=1e-15)
        np.testing.assert_allclose(w.tau, expect[1:4], atol=1e-15)


# -- sensors -------------------------------------------------------------


def test_sensor_hover_specific_force(params):
    st = VehicleState.at_rest([0.0, 0.0, 1.0])
    new = step_dynamics(st, hover_rotors(params), np.zeros(3), DT, params)
    rig = SensorRig(params)
    rig.reset(st)
    frame = rig.measure(st, new, Wrench.hover(params), DT)
    np.testing.assert_allclose(frame.f_s, [0.0, 0.0, 9.81], atol=1e-6)
    # world frame: f_s + g = 0 at hover
    np.testing.assert_allclose(
        quat.rotate(new.q, frame.f_s) + GRAVITY, np.zeros(3), atol=1e-6
    )
    np.testing.assert_allclose(frame.tau_bz_applied, [0.0, 0.0, 9.81], atol=1e-9)


def test_sensor_angular_acceleration_backward_difference(params):
    st = VehicleState.at_rest([0.0, 0.0, 1.0])
    st.omega = np.array([0.5, 0.0, 0.0])
    rig = SensorRig(params)
    rig.reset(st)
    new = step_dynamics(st, hover_rotors(params), np.zeros(3), DT, params)
    frame = rig.measure(st, new, Wrench.hover(params), DT)
    expected = (new.omega - st.omega) / DT
    np.testing.assert_allclose(frame.omega_dot_raw, expected, atol=1e-12)
    # constant rate -> zero angular acceleration on the next sample
    frame2 = rig.measure(new, new, Wrench.hover(params), DT)
    np.testing.assert_allclose(frame2.omega_dot_raw, np.zeros(3), atol=1e-12)


def test_sensor_noise_reproducible(params):
    from gustbench.vehicle import SensorNoise

    st = VehicleState.at_rest([0.0, 0.0, 1.0])
    new = step_dynamics(st, hover_rotors(params), np.zeros(3), DT, params)

    def sample(seed):
        rig = SensorRig(params, SensorNoise(accel=0.1, gyro=0.01),
                        np.random.default_rng(seed))
        rig.reset(st)
        return rig.measure(st, new, Wrench.hover(params), DT)

    a, b = sample(5), sample(5)
    np.testing.assert_array_equal(a.f_s, b.f_s)
    assert not np.allclose(sample(6).f_s, a.f_s)
