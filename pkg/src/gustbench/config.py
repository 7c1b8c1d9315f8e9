"""Scenario configuration: JSON schema, loading, and the shipped layouts.

A scenario file is a single JSON object (all keys optional unless noted):

  name, description, version
  rates:     {physics_hz, policy_hz}
  vehicle:   {mass, inertia[3], arm_length, c_tau, f_rotor_max, radius}
  controller:{type: "indi"|"pid", indi: {k_v, k_i, k_xi, k_omega, alpha_outer,
              alpha_inner, torque_sat, inner_gain_scale, integral_limit,
              cutoffs{accel,gyro,ang_accel,thrust,torque}}, pid: {...}}
  reward:    {c_p, c_a}
  action:    {v_cap}
  episode:   {timeout_s, terminal_on_hit, workspace[3][2], oob_margin}
  course:    {mode: "fixed"|"randomized", gates: [{center, normal, width,
              height, frame_thickness, frame_depth, velocity?}],
              start: [x,y,z], start_jitter, aperture[2], d_min, d_max,
              gate_box[3][2], start_box[3][2], skip_margin}
  wind:      {mode: "none"|"fixed"|"fan_tube", p_wind, n_fans,
              sources: [{origin, axis, u0, f_max, sigma_turb, tau_turb,
                         track?: {times, origins, axes}}],
              ranges: {u0, f_max, sigma_turb, tau_turb},
              geometry: {x0, sigma0, k_spread, kappa},
              gust: {p_per_s, mag, hold}, v_clamp,
              tube: {radius, length}}

The GUSTBENCH_CONFIG environment variable may point to a JSON file whose
top-level keys are merged (deep, file wins over defaults, scenario wins over
file) into every loaded scenario.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .filters import FilterCutoffs
from .gates import GateSpec
from .indi import ControllerGains
from .pid import PidGains
from .vehicle import VehicleParams
from .wind import GustParams, JetGeometry, MotionTrack, ThetaRanges

ENV_CONFIG_VAR = "GUSTBENCH_CONFIG"


class ConfigError(ValueError):
    """Scenario file is missing, malformed, or internally inconsistent."""


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class RatesConfig:
    physics_hz: float = 500.0
    policy_hz: float = 100.0

    def __post_init__(self) -> None:
        ratio = self.physics_hz / self.policy_hz
        if abs(ratio - round(ratio)) > 1e-9 or ratio < 1:
            raise ConfigError("physics_hz must be an integer multiple of policy_hz")

    @property
    def dt(self) -> float:
        return 1.0 / self.physics_hz

    @property
    def ticks_per_policy_step(self) -> int:
        return int(round(self.physics_hz / self.policy_hz))


@dataclass
class RewardConfig:
    c_p: float = 0.1  # proximity saturation constant
    c_a: float = 0.5  # alignment weight


@dataclass
class EpisodeConfig:
    timeout_s: float = 30.0
    terminal_on_hit: bool = True
    workspace: np.ndarray = field(
        default_factory=lambda: np.array([[-5.0, 5.0], [-5.0, 5.0], [0.0, 4.0]])
    )
    oob_margin: float = 1.0

    def __post_init__(self) -> None:
        self.workspace = np.asarray(self.workspace, dtype=float)
        if self.workspace.shape != (3, 2):
            raise ConfigError("workspace must be a (3, 2) min/max box")


@dataclass
class CourseConfig:
    mode: str = "randomized"  # or "fixed"
    gates: list[dict] = field(default_factory=list)
    start: list[float] | None = None
    start_jitter: float = 0.0
    width: float = 0.60
    height: float = 0.60
    d_min: float = 1.0
    d_max: float = 5.0
    gate_box: np.ndarray = field(
        default_factory=lambda: np.array([[-2.5, 2.5], [-2.5, 2.5], [0.8, 2.2]])
    )
    start_box: np.ndarray = field(
        default_factory=lambda: np.array([[-3.5, 3.5], [-3.5, 3.5], [0.5, 2.5]])
    )
    skip_margin: float = 1.0

    def __post_init__(self) -> None:
        self.gate_box = np.asarray(self.gate_box, dtype=float)
        self.start_box = np.asarray(self.start_box, dtype=float)
        if self.mode not in ("fixed", "randomized"):
            raise ConfigError(f"unknown course mode {self.mode!r}")
        if self.mode == "fixed":
            if not self.gates:
                raise ConfigError("fixed course needs a gate list")
            if self.start is None:
                raise ConfigError("fixed course needs a start position")

    def build_gates(self) -> list[GateSpec]:
        out = []
        for g in self.gates:
            out.append(
                GateSpec(
                    center=np.array(g["center"], dtype=float),
                    normal=np.array(g["normal"], dtype=float),
                    width=float(g.get("width", self.width)),
                    height=float(g.get("height", self.height)),
                    frame_thickness=float(g.get("frame_thickness", 0.05)),
                    frame_depth=float(g.get("frame_depth", 0.05)),
                    velocity=(
                        np.array(g["velocity"], dtype=float)
                        if g.get("velocity") is not None
                        else None
                    ),
                )
            )
        return out


@dataclass
class WindConfig:
    mode: str = "none"  # "none" | "fixed" | "fan_tube"
    p_wind: float = 0.5
    n_fans: int = 1
    sources: list[dict] = field(default_factory=list)
    ranges: ThetaRanges = field(default_factory=ThetaRanges)
    geometry: JetGeometry = field(default_factory=JetGeometry)
    gust: GustParams = field(default_factory=GustParams)
    v_clamp: float = 12.0
    tube_radius: tuple[float, float] = (0.25, 1.00)
    tube_length: tuple[float, float] = (0.2, 1.5)

    def __post_init__(self) -> None:
        if self.mode not in ("none", "fixed", "fan_tube"):
            raise ConfigError(f"unknown wind mode {self.mode!r}")
        if self.mode == "fixed" and not self.sources:
            raise ConfigError("fixed wind mode needs a sources list")


@dataclass
class ScenarioConfig:
    name: str = "unnamed"
    description: str = ""
    version: int = 1
    rates: RatesConfig = field(default_factory=RatesConfig)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    controller_type: str = "indi"
    indi_gains: ControllerGains = field(default_factory=ControllerGains)
    pid_gains: PidGains = field(default_factory=PidGains)
    reward: RewardConfig = field(default_factory=RewardConfig)
    v_cap: float = 2.0
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    course: CourseConfig = field(default_factory=CourseConfig)
    wind: WindConfig = field(default_factory=WindConfig)

    def with_controller(self, controller: str | None) -> "ScenarioConfig":
        if controller is None or controller == self.controller_type:
            return self
        if controller not in ("indi", "pid"):
            raise ConfigError(f"unknown controller {controller!r}")
        out = copy.deepcopy(self)
        out.controller_type = controller
        return out


def _build_cutoffs(d: dict) -> FilterCutoffs:
    return FilterCutoffs(
        accel=float(d.get("accel", 6.0)),
        gyro=float(d.get("gyro", 10.0)),
        ang_accel=float(d.get("ang_accel", 6.0)),
        thrust=float(d.get("thrust", 10.0)),
        torque=float(d.get("torque", 10.0)),
    )


def _build_indi(d: dict) -> ControllerGains:
    kw: dict[str, Any] = {}
    for key in ("k_v", "k_i", "k_xi", "k_omega"):
        if key in d:
            kw[key] = np.array(d[key], dtype=float)
    for key in ("alpha_outer", "alpha_inner", "torque_sat", "inner_gain_scale",
                "integral_limit"):
        if key in d:
            kw[key] = float(d[key])
    if "cutoffs" in d:
        kw["cutoffs"] = _build_cutoffs(d["cutoffs"])
    return ControllerGains(**kw)


def _build_pid(d: dict) -> PidGains:
    kw: dict[str, Any] = {}
    for key in ("vel_kp", "vel_ki", "vel_kd", "att_kp", "rate_kp", "rate_ki", "rate_kd"):
        if key in d:
            kw[key] = np.array(d[key], dtype=float)
    for key in ("tilt_max", "vel_int_limit", "rate_int_limit", "torque_sat"):
        if key in d:
            kw[key] = float(d[key])
    return PidGains(**kw)


def _pair(v, name: str) -> tuple[float, float]:
    if not isinstance(v, (list, tuple)) or len(v) != 2 or v[0] > v[1]:
        raise ConfigError(f"{name} must be an ordered [lo, hi] pair")
    return float(v[0]), float(v[1])


def scenario_from_dict(raw: dict) -> ScenarioConfig:
    try:
        rates = RatesConfig(**raw.get("rates", {}))
        veh_raw = dict(raw.get("vehicle", {}))
        if "inertia" in veh_raw:
            veh_raw["inertia"] = np.array(veh_raw["inertia"], dtype=float)
        vehicle = VehicleParams(**veh_raw)
        ctrl = raw.get("controller", {})
        reward = RewardConfig(**raw.get("reward", {}))
        action = raw.get("action", {})
        episode = EpisodeConfig(**{
            k: (np.array(v, dtype=float) if k == "workspace" else v)
            for k, v in raw.get("episode", {}).items()
        })
        course_raw = dict(raw.get("course", {}))
        for key in ("gate_box", "start_box"):
            if key in course_raw:
                course_raw[key] = np.array(course_raw[key], dtype=float)
        course = CourseConfig(**course_raw)
        wind_raw = dict(raw.get("wind", {}))
        ranges_raw = wind_raw.pop("ranges", {})
        geom_raw = wind_raw.pop("geometry", {})
        gust_raw = wind_raw.pop("gust", {})
        tube_raw = wind_raw.pop("tube", {})
        ranges = ThetaRanges(
            u0=_pair(ranges_raw.get("u0", [1.0, 10.0]), "u0"),
            f_max=_pair(ranges_raw.get("f_max", [0.05, 1.0]), "f_max"),
            sigma_turb=_pair(ranges_raw.get("sigma_turb", [0.001, 0.20]), "sigma_turb"),
            tau_turb=_pair(ranges_raw.get("tau_turb", [0.08, 0.40]), "tau_turb"),
        )
        geometry = JetGeometry(**geom_raw)
        gust = GustParams(
            p_per_s=float(gust_raw.get("p_per_s", 0.1)),
            mag_range=_pair(gust_raw.get("mag", [0.5, 2.0]), "gust.mag"),
            hold_range=_pair(gust_raw.get("hold", [0.2, 1.0]), "gust.hold"),
        )
        wind = WindConfig(
            mode=wind_raw.get("mode", "none"),
            p_wind=float(wind_raw.get("p_wind", 0.5)),
            n_fans=int(wind_raw.get("n_fans", 1)),
            sources=list(wind_raw.get("sources", [])),
            ranges=ranges,
            geometry=geometry,
            gust=gust,
            v_clamp=float(wind_raw.get("v_clamp", 12.0)),
            tube_radius=_pair(tube_raw.get("radius", [0.25, 1.00]), "tube.radius"),
            tube_length=_pair(tube_raw.get("length", [0.2, 1.5]), "tube.length"),
        )
        cfg = ScenarioConfig(
            name=str(raw.get("name", "unnamed")),
            description=str(raw.get("description", "")),
            version=int(raw.get("version", 1)),
            rates=rates,
            vehicle=vehicle,
            controller_type=str(ctrl.get("type", "indi")),
            indi_gains=_build_indi(ctrl.get("indi", {})),
            pid_gains=_build_pid(ctrl.get("pid", {})),
            reward=reward,
            v_cap=float(action.get("v_cap", 2.0)),
            episode=episode,
            course=course,
            wind=wind,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"bad scenario config: {exc}") from exc
    if cfg.controller_type not in ("indi", "pid"):
        raise ConfigError(f"unknown controller {cfg.controller_type!r}")
    # cross-checks the dataclasses cannot see individually
    cfg.course.gate_box  # noqa: B018 - validated in __post_init__
    for g in cfg.course.build_gates():
        g.validate(cfg.vehicle.radius)
    return cfg


def _global_overrides() -> dict:
    path = os.environ.get(ENV_CONFIG_VAR)
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {ENV_CONFIG_VAR}={path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{ENV_CONFIG_VAR} file must hold a JSON object")
    return data


def builtin_scenario_names() -> list[str]:
    pkg = resources.files("gustbench.scenarios")
    return sorted(p.name[:-5] for p in pkg.iterdir() if p.name.endswith(".json"))


def load_scenario(name_or_path: str) -> ScenarioConfig:
    """Load a shipped scenario by name or any scenario JSON by path."""
    path = Path(name_or_path)
    if path.suffix == ".json" and path.exists():
        raw = json.loads(path.read_text(encoding="utf-8"))
    else:
        pkg = resources.files("gustbench.scenarios")
        candidate = pkg / f"{name_or_path}.json"
        if not candidate.is_file():
            raise ConfigError(
                f"unknown scenario {name_or_path!r}; "
                f"available: {', '.join(builtin_scenario_names())}"
            )
        raw = json.loads(candidate.read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ConfigError("scenario file must hold a JSON object")
    overrides = _global_overrides()
    if overrides:
        raw = _deep_merge(overrides, raw)
    return scenario_from_dict(raw)
