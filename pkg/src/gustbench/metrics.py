"""Scenario tallies, success ratios, and tracking-error statistics.

The overall success rate folds three per-scenario ratios together: gate pass
ratio S = 1 - P/G_s, hit-free ratio H = 1 - h/G_s, completion rate F = f/N_t,
with OSR = (F + S + H)/3 zeroed outright when no trial completes. Position
error is measured against the integral of the commanded velocity from the
episode start, since tracking a velocity reference defines no other path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np


class ZeroGates(ValueError):
    pass


class EmptyLog(ValueError):
    pass


class MixedScenario(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioTally:
    n_gates: int  # gates per trial
    n_trials: int
    missed: int  # P
    hits: int  # h
    completed: int  # f

    def __post_init__(self) -> None:
        g_s = self.n_gates * self.n_trials
        if not 0 <= self.missed <= g_s:
            raise ValueError(f"missed count {self.missed} outside [0, {g_s}]")
        if not 0 <= self.hits <= g_s:
            raise ValueError(f"hit count {self.hits} outside [0, {g_s}]")
        if not 0 <= self.completed <= self.n_trials:
            raise ValueError(f"completed count {self.completed} outside [0, {self.n_trials}]")

    @property
    def g_s(self) -> int:
        return self.n_gates * self.n_trials


def compute_ratios(tally: ScenarioTally) -> tuple[float, float, float]:
    """(S, H, F): gate pass ratio, hit-free ratio, completion rate."""
    if tally.g_s == 0:
        raise ZeroGates("tally has no scheduled gate passes")
    s = 1.0 - tally.missed / tally.g_s
    h = 1.0 - tally.hits / tally.g_s
    f = tally.completed / tally.n_trials
    return s, h, f


def compute_osr(s: float, h: float, f: float) -> float:
    return (f + s + h) / 3.0 if f > 0.0 else 0.0


def osr_from_tally(tally: ScenarioTally) -> float:
    return compute_osr(*compute_ratios(tally))


@dataclass(frozen=True)
class TrackingErrors:
    rmse: float  # position error vs integrated command, m
    mae: float
    max_abs: float
    rmse_vel: float  # |v - v_des| RMS, m/s


def tracking_errors_from_series(
    t: np.ndarray, p: np.ndarray, v: np.ndarray, v_des: np.ndarray
) -> TrackingErrors:
    """Errors from aligned samples. The position reference is the cumulative
    trapezoid of v_des starting at the first position sample."""
    if len(t) == 0:
        raise EmptyLog("no samples")
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    v_des = np.asarray(v_des, dtype=float)
    vel_err = np.linalg.norm(v - v_des, axis=1)
    p_ref = np.empty_like(p)
    p_ref[0] = p[0]
    if len(t) > 1:
        dt = np.diff(t)[:, None]
        steps = 0.5 * (v_des[1:] + v_des[:-1]) * dt
        p_ref[1:] = p[0] + np.cumsum(steps, axis=0)
    pos_err = np.linalg.norm(p - p_ref, axis=1)
    return TrackingErrors(
        rmse=float(np.sqrt(np.mean(pos_err**2))),
        mae=float(np.mean(pos_err)),
        max_abs=float(np.max(pos_err)),
        rmse_vel=float(np.sqrt(np.mean(vel_err**2))),
    )


# -- trajectory logs (NDJSON) -------------------------------------------------


def read_episode(path: str | Path) -> dict:
    """Parse one episode log: {'meta': ..., 'steps': [...], 'result': ...}."""
    meta = None
    result = None
    steps = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            kind = rec.get("type")
            if kind == "meta":
                meta = rec
            elif kind == "result":
                result = rec
            elif kind == "step":
                steps.append(rec)
    if meta is None or result is None:
        raise EmptyLog(f"{path}: missing meta or result record")
    return {"meta": meta, "steps": steps, "result": result}


def compute_tracking_errors(episode: dict) -> TrackingErrors:
    steps = episode["steps"]
    if not steps:
        raise EmptyLog("episode has no step records")
    t = np.array([s["t"] for s in steps])
    p = np.array([s["p"] for s in steps])
    v = np.array([s["v"] for s in steps])
    v_des = np.array([s["v_des"] for s in steps])
    return tracking_errors_from_series(t, p, v, v_des)


@dataclass
class ScenarioSummary:
    scenario: str
    controller: str
    tally: ScenarioTally
    osr: float
    s: float
    h: float
    f: float
    rmse: float
    mae: float
    max_abs: float
    rmse_vel: float

    def to_record(self) -> dict:
        return {
            "type": "summary",
            "scenario": self.scenario,
            "controller": self.controller,
            "n_gates": self.tally.n_gates,
            "n_trials": self.tally.n_trials,
            "missed": self.tally.missed,
            "hits": self.tally.hits,
            "completed": self.tally.completed,
            "gate_pass_ratio": self.s,
            "hit_free_ratio": self.h,
            "completion_rate": self.f,
            "osr": self.osr,
            "rmse": self.rmse,
            "mae": self.mae,
            "max_abs": self.max_abs,
            "rmse_vel": self.rmse_vel,
        }


def aggregate_trials(episodes: Iterable[dict]) -> list[ScenarioSummary]:
    """Group parsed episodes by (scenario, controller) and tally them.

    Episodes of one group must agree on the gate count; output order is
    sorted by key so shuffling the input changes nothing.
    """
    groups: dict[tuple[str, str], list[dict]] = {}
    for ep in episodes:
        key = (ep["meta"]["scenario"], ep["meta"]["controller"])
        groups.setdefault(key, []).append(ep)
    out = []
    for (scenario, controller) in sorted(groups):
        eps = groups[(scenario, controller)]
        n_gates = {ep["meta"]["n_gates"] for ep in eps}
        if len(n_gates) != 1:
            raise MixedScenario(
                f"{scenario}/{controller}: inconsistent gate counts {sorted(n_gates)}"
            )
        tally = ScenarioTally(
            n_gates=n_gates.pop(),
            n_trials=len(eps),
            missed=sum(ep["result"]["missed"] for ep in eps),
            hits=sum(ep["result"]["hits"] for ep in eps),
            completed=sum(1 for ep in eps if ep["result"]["completed"]),
        )
        s, h, f = compute_ratios(tally)
        errs = [compute_tracking_errors(ep) for ep in eps if ep["steps"]]
        out.append(
            ScenarioSummary(
                scenario=scenario,
                controller=controller,
                tally=tally,
                osr=compute_osr(s, h, f),
                s=s,
                h=h,
                f=f,
                rmse=float(np.mean([e.rmse for e in errs])) if errs else math.nan,
                mae=float(np.mean([e.mae for e in errs])) if errs else math.nan,
                max_abs=float(np.mean([e.max_abs for e in errs])) if errs else math.nan,
                rmse_vel=float(np.mean([e.rmse_vel for e in errs])) if errs else math.nan,
            )
        )
    return out


def aggregate_directory(log_dir: str | Path) -> list[ScenarioSummary]:
    paths = sorted(Path(log_dir).glob("*.ndjson"))
    episodes = []
    for p in paths:
        if p.name.startswith("summary"):
            continue
        episodes.append(read_episode(p))
    if not episodes:
        raise EmptyLog(f"no episode logs under {log_dir}")
    return aggregate_trials(episodes)


def format_table(summaries: list[ScenarioSummary]) -> str:
    """Aligned text table; percentages printed with one decimal."""
    header = (
        f"{'Scenario':<12} {'Ctrl':<5} {'OSR (%)':>8} {'P':>4} {'h':>4} {'f':>4} "
        f"{'RMSE':>7} {'MAE':>7} {'MaxAbs':>7} {'RMSEVel':>8}"
    )
    lines = [header, "-" * len(header)]
    for s in summaries:
        lines.append(
            f"{s.scenario:<12} {s.controller:<5} {100.0 * s.osr:>8.1f} "
            f"{s.tally.missed:>4d} {s.tally.hits:>4d} {s.tally.completed:>4d} "
            f"{s.rmse:>7.3f} {s.mae:>7.3f} {s.max_abs:>7.3f} {s.rmse_vel:>8.3f}"
        )
    return "\n".join(lines)
