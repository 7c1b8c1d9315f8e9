"""Session layer shared by the TCP protocol server, the HTTP service, and the CLI.

A session is one environment instance plus its configuration. Sessions are
isolated (no shared mutable state) and internally locked so message handling
per session is strictly sequential while different sessions run concurrently.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import PROTOCOL_VERSION
from .config import ConfigError, ScenarioConfig, builtin_scenario_names, load_scenario, scenario_from_dict, _deep_merge
from .env import ACT_DIM, OBS_DIM, Environment


class SessionError(Exception):
    """Protocol-level error with a machine-readable code."""

    def __init__(self, code: str, detail: str = ""):
        super().__init__(detail or code)
        self.code = code
        self.detail = detail or code


@dataclass
class Session:
    session_id: str
    env: Environment
    scenario: str
    controller: str
    seed: int
    step_count: int = 0
    was_reset: bool = False
    lock: threading.Lock = field(default_factory=threading.Lock)


def hello_payload() -> dict[str, Any]:
    return {"version": PROTOCOL_VERSION, "obs_dim": OBS_DIM, "act_dim": ACT_DIM}


class SessionManager:
    """Creates and drives isolated environment sessions."""

    def __init__(self, max_sessions: int = 64):
        self.max_sessions = max_sessions
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self._ids = itertools.count()

    def list_scenarios(self) -> list[str]:
        return builtin_scenario_names()

    def configure(
        self,
        scenario: str,
        controller: str | None = None,
        seed: int = 0,
        overrides: dict | None = None,
    ) -> Session:
        if overrides:
            cfg = self._apply_overrides(scenario, controller, overrides)
        else:
            try:
                cfg = load_scenario(scenario).with_controller(controller)
            except ConfigError as exc:
                raise SessionError("unknown_scenario", str(exc)) from exc
        with self._lock:
            if len(self._sessions) >= self.max_sessions:
                raise SessionError("too_many_sessions", f"limit is {self.max_sessions}")
            sid = f"s{next(self._ids)}"
            sess = Session(
                session_id=sid,
                env=Environment(cfg),
                scenario=cfg.name,
                controller=cfg.controller_type,
                seed=seed,
            )
            self._sessions[sid] = sess
        return sess

    @staticmethod
    def _apply_overrides(scenario: str, controller: str | None, overrides: dict) -> ScenarioConfig:
        import json
        from importlib import resources

        pkg = resources.files("gustbench.scenarios")
        candidate = pkg / f"{scenario}.json"
        from pathlib import Path

        path = Path(scenario)
        if path.suffix == ".json" and path.exists():
            raw = json.loads(path.read_text(encoding="utf-8"))
        elif candidate.is_file():
            raw = json.loads(candidate.read_text(encoding="utf-8"))
        else:
            raise SessionError("unknown_scenario", f"no scenario {scenario!r}")
        try:
            cfg = scenario_from_dict(_deep_merge(raw, overrides))
            return cfg.with_controller(controller)
        except ConfigError as exc:
            raise SessionError("bad_config", str(exc)) from exc

    def get(self, session_id: str) -> Session:
        with self._lock:
            sess = self._sessions.get(session_id)
        if sess is None:
            raise SessionError("unknown_session", f"no session {session_id!r}")
        return sess

    def reset(self, session_id: str, seed: int | None = None) -> np.ndarray:
        sess = self.get(session_id)
        with sess.lock:
            if seed is not None:
                sess.seed = int(seed)
            obs = sess.env.reset(sess.seed)
            sess.was_reset = True
            sess.step_count = 0
            return obs

    def step(self, session_id: str, action: Any) -> dict[str, Any]:
        sess = self.get(session_id)
        with sess.lock:
            if not sess.was_reset:
                raise SessionError("not_reset", "call reset before step")
            if sess.env.done:
                raise SessionError("episode_done", "episode finished; reset first")
            arr = np.asarray(action, dtype=float)
            if arr.shape != (ACT_DIM,) or not np.all(np.isfinite(arr)):
                raise SessionError("bad_action", f"action must be {ACT_DIM} finite reals")
            res = sess.env.step(arr)
            sess.step_count += 1
            return {
                "obs": res.obs,
                "reward": res.reward,
                "done": res.done,
                "info": res.info,
            }

    def close(self, session_id: str) -> None:
        with self._lock:
            self._sessions.pop(session_id, None)

    def close_all(self) -> None:
        with self._lock:
            self._sessions.clear()
