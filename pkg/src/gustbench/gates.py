"""Gate geometry, pose randomization, crossing/hit detection, course tracking.

Gates are rectangular apertures with a solid frame ring. Crossing detection
is segment-based against the gate plane at the crossing instant (poses of
moving gates are interpolated within the step), so halving the physics step
never changes a classification on a continuous trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

WORLD_UP = np.array([0.0, 0.0, 1.0])


class GateOutcome(Enum):
    PENDING = "pending"
    PASSED = "passed"
    MISSED = "missed"
    HIT_PASSED = "hit+passed"
    HIT_MISSED = "hit+missed"


class CrossEvent(Enum):
    NONE = "none"
    PASS = "pass"
    MISS_CROSS = "miss-cross"


@dataclass
class GateSpec:
    """One gate: pose, aperture, frame solid, optional linear motion."""

    center: np.ndarray
    normal: np.ndarray
    width: float = 0.60
    height: float = 0.60
    frame_thickness: float = 0.05
    frame_depth: float = 0.05
    velocity: np.ndarray | None = None  # linear motion, m/s

    def __post_init__(self) -> None:
        self.center = np.asarray(self.center, dtype=float)
        n = np.asarray(self.normal, dtype=float)
        nn = np.linalg.norm(n)
        if nn < 1e-12:
            raise ValueError("gate normal must be nonzero")
        self.normal = n / nn
        if self.velocity is not None:
            self.velocity = np.asarray(self.velocity, dtype=float)
        # in-plane axes are fixed by the normal; cache for the hot path
        u = np.cross(WORLD_UP, self.normal)
        nu = np.linalg.norm(u)
        if nu < 1e-9:  # normal vertical: pick x as the in-plane u axis
            u = np.array([1.0, 0.0, 0.0])
        else:
            u = u / nu
        self._u_axis = u
        self._v_axis = np.cross(self.normal, u)

    def validate(self, drone_radius: float) -> None:
        if min(self.width, self.height) <= 2.0 * drone_radius:
            raise ValueError("aperture must exceed the drone diameter")

    def center_at(self, t: float) -> np.ndarray:
        if self.velocity is None:
            return self.center
        return self.center + t * self.velocity

    def plane_axes(self) -> tuple[np.ndarray, np.ndarray]:
        """In-plane axes (u horizontal-ish, v completing the frame)."""
        return self._u_axis, self._v_axis

    def local_coords(self, p: np.ndarray, t: float) -> tuple[float, float, float]:
        """(u, v, n) of p in the gate frame at time t."""
        d = p - self.center_at(t)
        return float(d @ self._u_axis), float(d @ self._v_axis), float(d @ self.normal)


def frame_distance(gate: GateSpec, p: np.ndarray, t: float) -> float:
    """Euclidean distance from p to the gate's solid frame ring."""
    u, v, n = gate.local_coords(p, t)
    au, av = abs(u), abs(v)
    hw, hh = 0.5 * gate.width, 0.5 * gate.height
    ow, oh = hw + gate.frame_thickness, hh + gate.frame_thickness
    if au <= hw and av <= hh:
        # inside the aperture: nearest frame point is straight out a side
        d2d = min(hw - au, hh - av)
    elif au <= ow and av <= oh:
        d2d = 0.0  # within the ring band
    else:
        d2d = math.hypot(max(0.0, au - ow), max(0.0, av - oh))
    dn = max(0.0, abs(n) - 0.5 * gate.frame_depth)
    return math.hypot(d2d, dn)


def detect_frame_hit(gate: GateSpec, p: np.ndarray, t: float, r_d: float) -> bool:
    return frame_distance(gate, p, t) <= r_d


def detect_crossing(
    p0: np.ndarray,
    p1: np.ndarray,
    gate: GateSpec,
    t0: float,
    t1: float,
    travel_normal: np.ndarray,
    r_d: float,
) -> tuple[CrossEvent, float]:
    """Classify the segment p0->p1 against the gate plane.

    travel_normal is the gate normal oriented along the course direction;
    only front-to-back crossings count. Returns (event, fraction s in [0,1]
    of the crossing along the segment).
    """
    g0 = float((p0 - gate.center_at(t0)) @ travel_normal)
    g1 = float((p1 - gate.center_at(t1)) @ travel_normal)
    if not (g0 < 0.0 <= g1):
        return CrossEvent.NONE, 0.0
    # both p and a moving gate center are linear in s, so g is linear in s
    s = g0 / (g0 - g1) if g1 != g0 else 0.0
    tc = t0 + s * (t1 - t0)
    pc = p0 + s * (p1 - p0)
    u, v, _ = gate.local_coords(pc, tc)
    if abs(u) <= 0.5 * gate.width - r_d and abs(v) <= 0.5 * gate.height - r_d:
        return CrossEvent.PASS, s
    return CrossEvent.MISS_CROSS, s


@dataclass
class CourseEvent:
    gate_index: int
    kind: str  # "pass" | "miss" | "hit"
    t: float


@dataclass
class CourseState:
    """Sequential multi-gate progression with per-gate outcome bookkeeping."""

    gates: list[GateSpec]
    drone_radius: float
    start: np.ndarray
    skip_margin: float = 1.0  # m past the gate plane counts as a skip-miss
    active: int = 0
    outcomes: list[GateOutcome] = field(default_factory=list)
    hits: list[bool] = field(default_factory=list)
    travel_normals: list[np.ndarray] = field(default_factory=list)
    complete: bool = False

    def __post_init__(self) -> None:
        self.start = np.asarray(self.start, dtype=float)
        self.outcomes = [GateOutcome.PENDING] * len(self.gates)
        self.hits = [False] * len(self.gates)
        # orient each normal along the course direction
        ref = self.start
        for g in self.gates:
            g.validate(self.drone_radius)
            n = g.normal.copy()
            if float(n @ (g.center - ref)) < 0.0:
                n = -n
            self.travel_normals.append(n)
            ref = g.center

    @property
    def active_gate(self) -> GateSpec | None:
        return self.gates[self.active] if self.active < len(self.gates) else None

    def active_normal(self) -> np.ndarray | None:
        return self.travel_normals[self.active] if self.active < len(self.gates) else None

    def _record(self, idx: int, passed: bool) -> None:
        if self.hits[idx]:
            self.outcomes[idx] = GateOutcome.HIT_PASSED if passed else GateOutcome.HIT_MISSED
        else:
            self.outcomes[idx] = GateOutcome.PASSED if passed else GateOutcome.MISSED

    def update(self, p0: np.ndarray, p1: np.ndarray, t0: float, t1: float) -> list[CourseEvent]:
        """Advance bookkeeping over one physics step; returns new events."""
        if self.complete:
            return []
        events: list[CourseEvent] = []
        # frame contact against every gate, one count per gate per trial
        for i, g in enumerate(self.gates):
            if not self.hits[i] and detect_frame_hit(g, p1, t1, self.drone_radius):
                self.hits[i] = True
                events.append(CourseEvent(i, "hit", t1))
                if self.outcomes[i] is GateOutcome.PASSED:
                    self.outcomes[i] = GateOutcome.HIT_PASSED
                elif self.outcomes[i] is GateOutcome.MISSED:
                    self.outcomes[i] = GateOutcome.HIT_MISSED

        while self.active < len(self.gates):
            idx = self.active
            gate = self.gates[idx]
            n_travel = self.travel_normals[idx]
            event, _ = detect_crossing(p0, p1, gate, t0, t1, n_travel, self.drone_radius)
            if event is CrossEvent.PASS:
                self._record(idx, passed=True)
                events.append(CourseEvent(idx, "pass", t1))
                self.active += 1
                continue
            if event is CrossEvent.MISS_CROSS:
                self._record(idx, passed=False)
                events.append(CourseEvent(idx, "miss", t1))
                self.active += 1
                continue
            # skip rule: sailed well past the plane without crossing inside it
            depth = float((p1 - gate.center_at(t1)) @ n_travel)
            if depth > self.skip_margin:
                self._record(idx, passed=False)
                events.append(CourseEvent(idx, "miss", t1))
                self.active += 1
                continue
            break
        if self.active >= len(self.gates):
            self.complete = True
        return events

    def tally(self) -> tuple[int, int]:
        """(missed gates, hit gates) so far."""
        missed = sum(
            1 for o in self.outcomes if o in (GateOutcome.MISSED, GateOutcome.HIT_MISSED)
        )
        return missed, sum(self.hits)

    def all_passed(self) -> bool:
        return all(
            o in (GateOutcome.PASSED, GateOutcome.HIT_PASSED) for o in self.outcomes
        )


def randomize_gate_and_start(
    rng: np.random.Generator,
    gate_box: np.ndarray,
    start_box: np.ndarray,
    d_min: float = 1.0,
    d_max: float = 5.0,
    width: float = 0.60,
    height: float = 0.60,
) -> tuple[GateSpec, np.ndarray]:
    """Uniform gate pose and start position with the distance constraint.

    Boxes are (3, 2) [min, max] per axis. The start is rejection-sampled until
    d_min <= |start - gate| <= d_max. Gate normals are horizontal with uniform
    azimuth (the yaw reference needs a horizontal component).
    """
    center = rng.uniform(gate_box[:, 0], gate_box[:, 1])
    az = rng.uniform(-math.pi, math.pi)
    normal = np.array([math.cos(az), math.sin(az), 0.0])
    gate = GateSpec(center=center, normal=normal, width=width, height=height)
    while True:
        start = rng.uniform(start_box[:, 0], start_box[:, 1])
        d = float(np.linalg.norm(start - center))
        if d_min <= d <= d_max:
            return gate, start


def place_fan_tube_sources(
    rng: np.random.Generator,
    gate: GateSpec,
    start: np.ndarray,
    n_fans: int,
    radius_range: tuple[float, float] = (0.25, 1.00),
    length_range: tuple[float, float] = (0.2, 1.5),
) -> tuple[list[tuple[np.ndarray, np.ndarray]], float, float]:
    """Fan placements on a virtual tube along the gate normal.

    The tube extends from the gate center toward the start side (the approach
    corridor). Fans sit on the lateral surface and point at the centerline.
    Returns (placements, tube_radius, tube_length).
    """
    r_tube = rng.uniform(*radius_range)
    l_tube = rng.uniform(*length_range)
    n_app = gate.normal.copy()
    if float(n_app @ (start - gate.center)) < 0.0:
        n_app = -n_app
    u_ax, v_ax = gate.plane_axes()
    placements = []
    for _ in range(n_fans):
        s = rng.uniform(0.0, l_tube)
        phi = rng.uniform(0.0, 2.0 * math.pi)
        axis_pt = gate.center + s * n_app
        origin = axis_pt + r_tube * (math.cos(phi) * u_ax + math.sin(phi) * v_ax)
        axis = axis_pt - origin
        placements.append((origin, axis / np.linalg.norm(axis)))
    return placements, r_tube, l_tube
