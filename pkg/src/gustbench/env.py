"""Episode orchestration: observation/action mapping, rewards, termination.

One environment instance owns a vehicle, a controller, a wind field, and a
gate course. The policy runs at the policy rate; its velocity reference is
held across the physics ticks in between. All randomness flows from the reset
seed through named child streams, so (seed, action sequence) fully determines
a trajectory and the controller choice never perturbs the environment draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import quat
from .config import ScenarioConfig
from .gates import (
    CourseState,
    GateOutcome,
    GateSpec,
    place_fan_tube_sources,
    randomize_gate_and_start,
)
from .indi import GeometricIndiController
from .mixer import wrench_from_rotors
from .pid import CascadedPidController
from .vehicle import (
    NonFiniteState,
    SensorRig,
    VehicleState,
    step_dynamics,
)
from .wind import ActiveJet, JetSource, MotionTrack, WindField, randomize_episode

OBS_DIM = 20
ACT_DIM = 4


class StepBeforeReset(RuntimeError):
    """step() was called on an environment that was never reset."""


@dataclass
class RewardTerms:
    proximity: float
    collision: float
    alignment: float

    @property
    def total(self) -> float:
        return self.proximity + self.collision + self.alignment

    def as_dict(self) -> dict[str, float]:
        return {
            "proximity": self.proximity,
            "collision": self.collision,
            "alignment": self.alignment,
            "total": self.total,
        }


@dataclass
class StepResult:
    obs: np.ndarray
    reward: float
    done: bool
    info: dict[str, Any]


def map_action(action: np.ndarray, v_cap: float) -> np.ndarray:
    """Clamp to the unit box and scale: the fourth channel sets the magnitude
    cap affinely from [-1, 1] onto [0, v_cap]."""
    a = np.clip(np.asarray(action, dtype=float), -1.0, 1.0)
    v_max = v_cap * (a[3] + 1.0) / 2.0
    return v_max * a[:3]


def compute_reward(
    p: np.ndarray,
    v: np.ndarray,
    gate_center: np.ndarray,
    gate_normal: np.ndarray,
    hit: bool,
    c_p: float,
    c_a: float,
) -> RewardTerms:
    """Per-step reward: gate proximity, collision penalty, approach alignment."""
    d_goal = float(np.linalg.norm(gate_center - p))
    proximity = 1.0 / (d_goal + c_p)
    collision = -10.0 if hit else 0.0
    speed = float(np.linalg.norm(v))
    if speed < 1e-3:
        alignment = 0.0
    else:
        alignment = c_a * float((v / speed) @ gate_normal)
    return RewardTerms(proximity=proximity, collision=collision, alignment=alignment)


class Environment:
    """Gate-traversal environment over the simulated vehicle."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self._ready = False
        self._done = True
        self._episode: dict[str, Any] = {}

    # -- episode assembly ---------------------------------------------------

    def reset(self, seed: int) -> np.ndarray:
        cfg = self.config
        ss = np.random.SeedSequence(seed)
        course_ss, theta_ss, process_ss, noise_ss = ss.spawn(4)
        course_rng = np.random.default_rng(course_ss)
        theta_rng = np.random.default_rng(theta_ss)
        process_rng = np.random.default_rng(process_ss)

        gates, start = self._build_course(course_rng)
        self.course = CourseState(
            gates=gates,
            drone_radius=cfg.vehicle.radius,
            start=start,
            skip_margin=cfg.course.skip_margin,
        )
        self.state = VehicleState.at_rest(start)
        self.wind = self._build_wind(course_rng, theta_rng, process_rng, gates[0], start)

        if cfg.controller_type == "pid":
            self.controller = CascadedPidController(
                cfg.vehicle, cfg.pid_gains, cfg.rates.physics_hz
            )
        else:
            self.controller = GeometricIndiController(
                cfg.vehicle, cfg.indi_gains, cfg.rates.physics_hz
            )
        self.controller.reset(self.state)
        self.rig = SensorRig(cfg.vehicle, rng=np.random.default_rng(noise_ss))
        self.rig.reset(self.state)
        self.rotors = np.full(4, cfg.vehicle.hover_rotor_thrust)
        self.v_des = np.zeros(3)
        self._last_wind = self.wind.sample(self.state.p, self.state.v, 0.0, cfg.rates.dt)
        self._steps = 0
        self._ready = True
        self._done = False
        self._cause: str | None = None
        self._episode = {
            "seed": seed,
            "scenario": cfg.name,
            "controller": cfg.controller_type,
            "wind_enabled": self.wind.enabled,
            "n_gates": len(gates),
        }
        return self.observe()

    def _build_course(self, rng: np.random.Generator) -> tuple[list[GateSpec], np.ndarray]:
        cc = self.config.course
        if cc.mode == "fixed":
            gates = cc.build_gates()
            start = np.array(cc.start, dtype=float)
            if cc.start_jitter > 0.0:
                start = start + rng.uniform(-cc.start_jitter, cc.start_jitter, 3)
            return gates, start
        gate, start = randomize_gate_and_start(
            rng, cc.gate_box, cc.start_box, cc.d_min, cc.d_max, cc.width, cc.height
        )
        return [gate], start

    def _build_wind(
        self,
        course_rng: np.random.Generator,
        theta_rng: np.random.Generator,
        process_rng: np.random.Generator,
        first_gate: GateSpec,
        start: np.ndarray,
    ) -> WindField:
        wc = self.config.wind
        if wc.mode == "none":
            return WindField([], v_clamp=wc.v_clamp)
        if wc.mode == "fan_tube":
            placements, r_tube, l_tube = place_fan_tube_sources(
                course_rng, first_gate, start, wc.n_fans, wc.tube_radius, wc.tube_length
            )
            self._episode_tube = (r_tube, l_tube)
            return randomize_episode(
                theta_rng,
                process_rng,
                placements,
                wc.ranges,
                p_wind=wc.p_wind,
                geometry=wc.geometry,
                gust=wc.gust,
                v_clamp=wc.v_clamp,
            )
        # fixed sources straight from config
        jets = []
        enabled = theta_rng.random() < wc.p_wind
        for raw in wc.sources:
            track = None
            if raw.get("track"):
                tr = raw["track"]
                track = MotionTrack(
                    times=np.array(tr["times"], dtype=float),
                    origins=np.array(tr["origins"], dtype=float),
                    axes=np.array(tr["axes"], dtype=float),
                )
            src = JetSource(
                origin=np.array(raw["origin"], dtype=float),
                axis=np.array(raw["axis"], dtype=float),
                u0=float(raw["u0"]),
                f_max=float(raw.get("f_max", 0.5)),
                sigma_turb=float(raw.get("sigma_turb", 0.05)),
                tau_turb=float(raw.get("tau_turb", 0.2)),
                geometry=wc.geometry,
                track=track,
            )
            if enabled:
                jets.append(ActiveJet(src, process_rng, wc.gust))
        return WindField(jets, v_clamp=wc.v_clamp)

    # -- observation --------------------------------------------------------

    def observe(self) -> np.ndarray:
        """20-vector: p, rpy, v, omega, gate-relative position, aperture,
        gate normal. Wind state is deliberately absent."""
        st = self.state
        gate = self.course.active_gate
        if gate is None:  # course done; keep shape with the last gate
            gate = self.course.gates[-1]
            normal = self.course.travel_normals[-1]
        else:
            normal = self.course.active_normal()
        center = gate.center_at(st.t)
        rpy = quat.to_euler_zyx(st.q)
        obs = np.concatenate(
            [
                st.p,
                rpy,
                st.v,
                st.omega,
                center - st.p,
                [gate.width, gate.height],
                normal,
            ]
        )
        return obs

    # -- stepping -----------------------------------------------------------

    def step(self, action: np.ndarray) -> StepResult:
        if not self._ready:
            raise StepBeforeReset("call reset() before step()")
        if self._done:
            raise StepBeforeReset("episode finished; call reset()")
        cfg = self.config
        dt = cfg.rates.dt
        self.v_des = map_action(action, cfg.v_cap)

        events: list = []
        cause: str | None = None
        for _ in range(cfg.rates.ticks_per_policy_step):
            prev = self.state
            wind = self.wind.sample(prev.p, prev.v, prev.t, dt)
            self._last_wind = wind
            try:
                new = step_dynamics(prev, self.rotors, wind.f_w, dt, cfg.vehicle)
            except NonFiniteState:
                cause = "non-finite"
                break
            applied = wrench_from_rotors(self.rotors, cfg.vehicle)
            sensors = self.rig.measure(prev, new, applied, dt)
            self.state = new
            events.extend(self.course.update(prev.p, new.p, prev.t, new.t))
            gate = self.course.active_gate or self.course.gates[-1]
            normal = (
                self.course.active_normal()
                if self.course.active_gate is not None
                else self.course.travel_normals[-1]
            )
            self.rotors = self.controller.step(
                self.v_des, normal, gate.center_at(new.t), new, sensors, dt
            )
            if self._final_gate_passed():
                break

        self._steps += 1
        hit = any(e.kind == "hit" for e in events)

        gate = self.course.active_gate or self.course.gates[-1]
        normal = (
            self.course.active_normal()
            if self.course.active_gate is not None
            else self.course.travel_normals[-1]
        )
        terms = compute_reward(
            self.state.p,
            self.state.v,
            gate.center_at(self.state.t),
            normal,
            hit,
            cfg.reward.c_p,
            cfg.reward.c_a,
        )

        if cause is None:
            ws = cfg.episode.workspace
            margin = cfg.episode.oob_margin
            p = self.state.p
            if self._final_gate_passed():
                cause = "passed-final-gate"
            elif hit and cfg.episode.terminal_on_hit:
                cause = "collision"
            elif np.any(p < ws[:, 0] - margin) or np.any(p > ws[:, 1] + margin):
                cause = "out-of-bounds"
            elif self.state.t >= cfg.episode.timeout_s - 0.5 * dt:
                cause = "timeout"

        done = cause is not None
        if done:
            self._done = True
            self._cause = cause

        missed, hits = self.course.tally()
        info: dict[str, Any] = {
            "t": self.state.t,
            "events": [
                {"gate": e.gate_index, "kind": e.kind, "t": e.t} for e in events
            ],
            "reward_terms": terms.as_dict(),
            "v_des": self.v_des.copy(),
            "v_wind": self._last_wind.v_wind.copy(),
            "f_w": self._last_wind.f_w.copy(),
            "active_gate": self.course.active,
            "missed": missed,
            "hits": hits,
            "tracking_error": float(np.linalg.norm(self.state.v - self.v_des)),
        }
        if done:
            info["cause"] = cause
            info["completed"] = cause == "passed-final-gate"
            info["outcomes"] = [o.value for o in self.course.outcomes]
        return StepResult(obs=self.observe(), reward=terms.total, done=done, info=info)

    def _final_gate_passed(self) -> bool:
        return self.course.outcomes[-1] in (GateOutcome.PASSED, GateOutcome.HIT_PASSED)

    @property
    def done(self) -> bool:
        return self._done

    @property
    def episode_meta(self) -> dict[str, Any]:
        return dict(self._episode)
