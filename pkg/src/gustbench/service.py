"""HTTP service wrapping the simulator: session CRUD, stepping, evaluation.

FastAPI app with pydantic models; the CLI and any HTTP client drive the same
SessionManager the TCP protocol uses. Lists/arrays cross the wire as plain
JSON arrays of floats.
"""

from __future__ import annotations

from typing import Any

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import PROTOCOL_VERSION, __version__
from .env import ACT_DIM, OBS_DIM
from .metrics import EmptyLog, aggregate_directory, format_table
from .session import SessionError, SessionManager


class MetaResponse(BaseModel):
    service: str = "gustbench"
    version: str = __version__
    protocol_version: int = PROTOCOL_VERSION
    obs_dim: int = OBS_DIM
    act_dim: int = ACT_DIM


class ScenarioList(BaseModel):
    scenarios: list[str]


class CreateSessionRequest(BaseModel):
    scenario: str
    controller: str | None = None
    seed: int = 0
    overrides: dict[str, Any] | None = None


class CreateSessionResponse(BaseModel):
    session_id: str
    scenario: str
    controller: str
    seed: int


class ResetRequest(BaseModel):
    seed: int | None = None


class ResetResponse(BaseModel):
    obs: list[float] = Field(min_length=OBS_DIM, max_length=OBS_DIM)


class StepRequest(BaseModel):
    action: list[float] = Field(min_length=ACT_DIM, max_length=ACT_DIM)


class StepResponse(BaseModel):
    obs: list[float]
    reward: float
    done: bool
    info: dict[str, Any]


class EvalRequest(BaseModel):
    log_dir: str


class EvalResponse(BaseModel):
    summaries: list[dict[str, Any]]
    table: str


def _jsonable(x: Any) -> Any:
    if isinstance(x, np.ndarray):
        return [float(v) for v in x]
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def create_app(manager: SessionManager | None = None) -> FastAPI:
    manager = manager or SessionManager()
    app = FastAPI(title="gustbench environment service", version=__version__)
    app.state.manager = manager

    def _err(exc: SessionError) -> HTTPException:
        status = {
            "unknown_session": 404,
            "unknown_scenario": 404,
            "not_reset": 409,
            "episode_done": 409,
            "too_many_sessions": 429,
        }.get(exc.code, 400)
        return HTTPException(status_code=status, detail={"error": exc.code, "detail": exc.detail})

    @app.get("/health")
    def health() -> dict[str, str]:
        return {"status": "ok", "version": __version__}

    @app.get("/v1/meta", response_model=MetaResponse)
    def meta() -> MetaResponse:
        return MetaResponse()

    @app.get("/v1/scenarios", response_model=ScenarioList)
    def scenarios() -> ScenarioList:
        return ScenarioList(scenarios=manager.list_scenarios())

    @app.post("/v1/sessions", response_model=CreateSessionResponse)
    def create_session(req: CreateSessionRequest) -> CreateSessionResponse:
        try:
            sess = manager.configure(req.scenario, req.controller, req.seed, req.overrides)
        except SessionError as exc:
            raise _err(exc)
        return CreateSessionResponse(
            session_id=sess.session_id,
            scenario=sess.scenario,
            controller=sess.controller,
            seed=sess.seed,
        )

    @app.post("/v1/sessions/{session_id}/reset", response_model=ResetResponse)
    def reset(session_id: str, req: ResetRequest) -> ResetResponse:
        try:
            obs = manager.reset(session_id, req.seed)
        except SessionError as exc:
            raise _err(exc)
        return ResetResponse(obs=[float(v) for v in obs])

    @app.post("/v1/sessions/{session_id}/step", response_model=StepResponse)
    def step(session_id: str, req: StepRequest) -> StepResponse:
        try:
            out = manager.step(session_id, req.action)
        except SessionError as exc:
            raise _err(exc)
        return StepResponse(
            obs=[float(v) for v in out["obs"]],
            reward=float(out["reward"]),
            done=bool(out["done"]),
            info=_jsonable(out["info"]),
        )

    @app.delete("/v1/sessions/{session_id}")
    def close(session_id: str) -> dict[str, bool]:
        manager.close(session_id)
        return {"ok": True}

    @app.post("/v1/eval", response_model=EvalResponse)
    def evaluate(req: EvalRequest) -> EvalResponse:
        try:
            summaries = aggregate_directory(req.log_dir)
        except (EmptyLog, OSError) as exc:
            raise HTTPException(status_code=404, detail={"error": "empty_log", "detail": str(exc)})
        return EvalResponse(
            summaries=[s.to_record() for s in summaries],
            table=format_table(summaries),
        )

    return app
