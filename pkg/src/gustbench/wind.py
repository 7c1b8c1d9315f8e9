"""Localized fan-jet wind model with time-correlated turbulence and gusts.

Each jet has a linearly spreading Gaussian cross-section whose centerline
speed decays hyperbolically downstream, hard-gated outside a cutoff radius.
Turbulence is an exact-discretization Ornstein-Uhlenbeck process and gusts
are renewal bursts; both are attached per jet and only contribute inside that
jet's active region, so still air stays still when wind is disabled.
The only coupling to the vehicle is a quadratic drag force on the relative
velocity, clamped to the episode's force bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

V_CLAMP_DEFAULT = 12.0  # m/s, safety clamp on the summed wind speed
RHO_AIR = 1.225  # kg/m^3
CDA_DEFAULT = 0.012  # m^2 drag-area


@dataclass
class JetGeometry:
    """Spread/decay constants shared by all jets in an episode."""

    x0: float = 0.20  # virtual origin, m
    sigma0: float = 0.10  # initial width, m
    k_spread: float = 0.18
    kappa: float = 3.0  # cutoff multiplier


@dataclass
class MotionTrack:
    """Piecewise-linear track of (time, origin, axis) waypoints."""

    times: np.ndarray
    origins: np.ndarray  # (n, 3)
    axes: np.ndarray  # (n, 3), unit

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.origins = np.asarray(self.origins, dtype=float)
        self.axes = np.asarray(self.axes, dtype=float)
        if not (len(self.times) == len(self.origins) == len(self.axes)) or len(self.times) < 2:
            raise ValueError("track needs >= 2 aligned waypoints")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("track times must be strictly increasing")

    def pose_at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        ts = self.times
        if t <= ts[0]:
            return self.origins[0].copy(), self.axes[0].copy()
        if t >= ts[-1]:
            return self.origins[-1].copy(), self.axes[-1].copy()
        i = int(np.searchsorted(ts, t, side="right")) - 1
        w = (t - ts[i]) / (ts[i + 1] - ts[i])
        o = (1.0 - w) * self.origins[i] + w * self.origins[i + 1]
        a = (1.0 - w) * self.axes[i] + w * self.axes[i + 1]
        n = np.linalg.norm(a)
        return o, (a / n if n > 1e-12 else self.axes[i].copy())


@dataclass
class JetSource:
    """One fan jet: pose, strength, force bound, and its turbulence draw."""

    origin: np.ndarray
    axis: np.ndarray
    u0: float  # exit speed, m/s
    f_max: float  # N
    sigma_turb: float
    tau_turb: float
    geometry: JetGeometry = field(default_factory=JetGeometry)
    track: MotionTrack | None = None

    def __post_init__(self) -> None:
        self.origin = np.asarray(self.origin, dtype=float)
        self.axis = np.asarray(self.axis, dtype=float)
        n = np.linalg.norm(self.axis)
        if n < 1e-12:
            raise ValueError("jet axis must be nonzero")
        self.axis = self.axis / n

    def pose_at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        if self.track is None:
            return self.origin, self.axis
        return self.track.pose_at(t)


def jet_mean_velocity(
    origin: np.ndarray, axis: np.ndarray, geom: JetGeometry, u0: float, p: np.ndarray
) -> np.ndarray:
    """Mean jet velocity at p; zero upstream and outside the cutoff radius."""
    d = p - origin
    x = float(d @ axis)
    if x <= 0.0:
        return np.zeros(3)
    radial = d - x * axis
    r = float(np.linalg.norm(radial))
    sigma = geom.sigma0 + geom.k_spread * x
    if r > geom.kappa * sigma:
        return np.zeros(3)
    u_c = u0 * geom.x0 / (geom.x0 + x)
    return (u_c * math.exp(-0.5 * (r / sigma) ** 2)) * axis


def in_jet_region(
    origin: np.ndarray, axis: np.ndarray, geom: JetGeometry, p: np.ndarray
) -> bool:
    d = p - origin
    x = float(d @ axis)
    if x <= 0.0:
        return False
    r = float(np.linalg.norm(d - x * axis))
    return r <= geom.kappa * (geom.sigma0 + geom.k_spread * x)


class OuTurbulence:
    """3-D OU state with exact exponential discretization."""

    def __init__(self, sigma: float, tau: float, rng: np.random.Generator):
        self.sigma = sigma
        self.tau = tau
        self.rng = rng
        self.v = np.zeros(3)

    def step(self, dt: float) -> np.ndarray:
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        a = math.exp(-dt / self.tau)
        b = self.sigma * math.sqrt(max(0.0, 1.0 - a * a))
        self.v = a * self.v + b * self.rng.standard_normal(3)
        return self.v


@dataclass
class GustParams:
    p_per_s: float = 0.1  # activation probability per second
    mag_range: tuple[float, float] = (0.5, 2.0)  # m/s
    hold_range: tuple[float, float] = (0.2, 1.0)  # s


class GustProcess:
    """Intermittent held bursts: inactive -> (rare) activate -> hold -> decay."""

    def __init__(self, params: GustParams, rng: np.random.Generator):
        self.params = params
        self.rng = rng
        self.v = np.zeros(3)
        self.remaining = 0.0

    def step(self, dt: float) -> np.ndarray:
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.remaining > 0.0:
            self.remaining -= dt
            if self.remaining <= 0.0:
                self.v = np.zeros(3)
                self.remaining = 0.0
            return self.v
        if self.params.p_per_s > 0.0 and self.rng.random() < self.params.p_per_s * dt:
            direction = self.rng.standard_normal(3)
            n = np.linalg.norm(direction)
            direction = direction / n if n > 1e-12 else np.array([1.0, 0.0, 0.0])
            mag = self.rng.uniform(*self.params.mag_range)
            self.v = mag * direction
            self.remaining = self.rng.uniform(*self.params.hold_range)
        return self.v


@dataclass
class WindSample:
    v_wind: np.ndarray
    f_w: np.ndarray


class ActiveJet:
    """A jet plus its running stochastic state."""

    def __init__(self, source: JetSource, rng: np.random.Generator,
                 gust: GustParams | None = None):
        self.source = source
        self.turb = OuTurbulence(source.sigma_turb, source.tau_turb, rng)
        self.gust = GustProcess(gust or GustParams(), rng)


class WindField:
    """Per-episode wind state: zero or more jets with stochastic components.

    The stochastic processes advance once per call regardless of where the
    vehicle is, so the wind time series depends only on the seed.
    """

    def __init__(
        self,
        jets: list[ActiveJet],
        v_clamp: float = V_CLAMP_DEFAULT,
        rho: float = RHO_AIR,
        cda: float = CDA_DEFAULT,
    ):
        self.jets = jets
        self.v_clamp = v_clamp
        self.rho = rho
        self.cda = cda

    @property
    def enabled(self) -> bool:
        return len(self.jets) > 0

    def sample(self, p: np.ndarray, v_body: np.ndarray, t: float, dt: float) -> WindSample:
        """Advance the stochastic state one tick and evaluate wind at p.

        With no jets the episode has no aerodynamic coupling at all.
        """
        if not self.jets:
            return WindSample(v_wind=np.zeros(3), f_w=np.zeros(3))
        v_wind = np.zeros(3)
        f_bound = 0.0
        for jet in self.jets:
            origin, axis = jet.source.pose_at(t)
            v_turb = jet.turb.step(dt)
            v_gust = jet.gust.step(dt)
            geom = jet.source.geometry
            v_wind = v_wind + jet_mean_velocity(origin, axis, geom, jet.source.u0, p)
            if in_jet_region(origin, axis, geom, p):
                v_wind = v_wind + v_turb + v_gust
            f_bound = max(f_bound, jet.source.f_max)
        speed = float(np.linalg.norm(v_wind))
        if speed > self.v_clamp:
            v_wind = v_wind * (self.v_clamp / speed)
        v_rel = v_wind - v_body
        f_w = 0.5 * self.rho * self.cda * float(np.linalg.norm(v_rel)) * v_rel
        f_mag = float(np.linalg.norm(f_w))
        if f_mag > f_bound:
            f_w = f_w * (f_bound / f_mag) if f_mag > 0.0 else f_w
        return WindSample(v_wind=v_wind, f_w=f_w)


@dataclass
class ThetaRanges:
    """Uniform sampling ranges for the per-episode jet draw."""

    u0: tuple[float, float] = (1.0, 10.0)
    f_max: tuple[float, float] = (0.05, 1.0)
    sigma_turb: tuple[float, float] = (0.001, 0.20)
    tau_turb: tuple[float, float] = (0.08, 0.40)


def sample_theta(rng: np.random.Generator, ranges: ThetaRanges) -> tuple[float, float, float, float]:
    return (
        rng.uniform(*ranges.u0),
        rng.uniform(*ranges.f_max),
        rng.uniform(*ranges.sigma_turb),
        rng.uniform(*ranges.tau_turb),
    )


def randomize_episode(
    param_rng: np.random.Generator,
    process_rng: np.random.Generator,
    placements: list[tuple[np.ndarray, np.ndarray]],
    ranges: ThetaRanges,
    p_wind: float = 0.5,
    geometry: JetGeometry | None = None,
    gust: GustParams | None = None,
    v_clamp: float = V_CLAMP_DEFAULT,
) -> WindField:
    """Draw the episode's wind: with probability p_wind, jets at the given
    (origin, axis) placements with uniformly sampled strengths; otherwise an
    empty field. The enable draw and the theta draws always consume the same
    number of param_rng values per placement, so downstream streams stay
    aligned across enabled/disabled episodes.
    """
    geometry = geometry or JetGeometry()
    enabled = param_rng.random() < p_wind
    jets: list[ActiveJet] = []
    for origin, axis in placements:
        u0, f_max, sigma_t, tau_t = sample_theta(param_rng, ranges)
        if enabled:
            src = JetSource(
                origin=origin, axis=axis, u0=u0, f_max=f_max,
                sigma_turb=sigma_t, tau_turb=tau_t, geometry=geometry,
            )
            jets.append(ActiveJet(src, process_rng, gust))
    return WindField(jets, v_clamp=v_clamp)
