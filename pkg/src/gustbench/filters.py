"""Second-order Butterworth low-pass filtering for the controller feedback path.

Biquads are discretized with the bilinear transform (prewarped cutoff) and run
in transposed direct-form II. State is vectorized so one Biquad filters a
3-axis signal. First sample warm-starts the state to pass-through so the
incremental loops see no startup transient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import quat
from .vehicle import SensorFrame, GRAVITY


class InvalidCutoff(ValueError):
    """Cutoff must satisfy 0 < f_cut < f_s/2."""


@dataclass
class Biquad:
    b0: float
    b1: float
    b2: float
    a1: float
    a2: float
    f_cut: float
    f_s: float
    z1: np.ndarray | float = 0.0
    z2: np.ndarray | float = 0.0
    primed: bool = False

    def warm_start(self, x) -> None:
        """Set state so a constant input x is already at steady state."""
        x = np.asarray(x, dtype=float) if np.ndim(x) else float(x)
        self.z1 = (self.b1 + self.b2 - self.a1 - self.a2) * x
        self.z2 = (self.b2 - self.a2) * x
        self.primed = True

    def step(self, x):
        """Advance one sample; x may be scalar or a vector per channel."""
        if not self.primed:
            self.warm_start(x)
        y = self.b0 * x + self.z1
        self.z1 = self.b1 * x - self.a1 * y + self.z2
        self.z2 = self.b2 * x - self.a2 * y
        return y

    def gain_at(self, f_hz: float) -> float:
        """Analytic magnitude response |H(e^{j w})| at f_hz."""
        w = 2.0 * math.pi * f_hz / self.f_s
        e1 = complex(math.cos(-w), math.sin(-w))
        e2 = e1 * e1
        h = (self.b0 + self.b1 * e1 + self.b2 * e2) / (1.0 + self.a1 * e1 + self.a2 * e2)
        return abs(h)


def design_butterworth2(f_cut: float, f_s: float) -> Biquad:
    """Bilinear-transform Butterworth-2 low-pass with exact unit DC gain."""
    if not 0.0 < f_cut < 0.5 * f_s:
        raise InvalidCutoff(f"cutoff {f_cut} Hz invalid for sample rate {f_s} Hz")
    c = 1.0 / math.tan(math.pi * f_cut / f_s)  # prewarped
    d = 1.0 + math.sqrt(2.0) * c + c * c
    b0 = 1.0 / d
    return Biquad(
        b0=b0,
        b1=2.0 * b0,
        b2=b0,
        a1=2.0 * (1.0 - c * c) / d,
        a2=(1.0 - math.sqrt(2.0) * c + c * c) / d,
        f_cut=f_cut,
        f_s=f_s,
    )


@dataclass
class FilterCutoffs:
    """Channel cutoffs in Hz (accelerometer/gyro/angular-accel/thrust/torque)."""

    accel: float = 6.0
    gyro: float = 10.0
    ang_accel: float = 6.0
    thrust: float = 10.0
    torque: float = 10.0


@dataclass
class FilteredSignals:
    a_f: np.ndarray  # kinematic acceleration, world frame
    omega_f: np.ndarray
    omega_dot_f: np.ndarray
    tau_bz_f: np.ndarray  # specific thrust, world frame
    mu_f: np.ndarray


class FilterBank:
    """One 3-channel biquad per feedback signal."""

    def __init__(self, f_s: float, cutoffs: FilterCutoffs | None = None):
        self.f_s = f_s
        self.cutoffs = cutoffs or FilterCutoffs()
        c = self.cutoffs
        self._accel = design_butterworth2(c.accel, f_s)
        self._gyro = design_butterworth2(c.gyro, f_s)
        self._ang_accel = design_butterworth2(c.ang_accel, f_s)
        self._thrust = design_butterworth2(c.thrust, f_s)
        self._torque = design_butterworth2(c.torque, f_s)

    def reset(self, init: FilteredSignals | None = None) -> None:
        """Warm-start all channels; None reverts to first-sample priming."""
        if init is None:
            for bq in (self._accel, self._gyro, self._ang_accel, self._thrust, self._torque):
                bq.primed = False
            return
        self._accel.warm_start(init.a_f)
        self._gyro.warm_start(init.omega_f)
        self._ang_accel.warm_start(init.omega_dot_f)
        self._thrust.warm_start(init.tau_bz_f)
        self._torque.warm_start(init.mu_f)

    def update(self, sensors: SensorFrame, attitude: np.ndarray) -> FilteredSignals:
        """Filter one sensor frame.

        The accelerometer channel is converted to world-frame kinematic
        acceleration a = R(q) f_s + g before filtering, so hover reads zero.
        """
        a_kin = quat.rotate(attitude, sensors.f_s) + GRAVITY
        return FilteredSignals(
            a_f=self._accel.step(a_kin),
            omega_f=self._gyro.step(sensors.omega_meas),
            omega_dot_f=self._ang_accel.step(sensors.omega_dot_raw),
            tau_bz_f=self._thrust.step(sensors.tau_bz_applied),
            mu_f=self._torque.step(sensors.mu_applied),
        )
