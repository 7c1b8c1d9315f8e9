"""Newline-delimited JSON environment protocol over TCP (or stdio).

One JSON object per line. Requests: {"cmd": "hello" | "configure" | "reset" |
"step" | "close", ...}; every request gets exactly one response line. A
connection may host several sessions (configure returns a session id; the
"session" field selects one, defaulting to the most recent). Malformed input
produces {"error": code, "detail": ...}, never a dropped connection. See
docs/protocol.md for byte-level examples.
"""

from __future__ import annotations

import json
import socket
import socketserver
import threading
from typing import Any, BinaryIO

import numpy as np

from .session import SessionError, SessionManager, hello_payload


class BindFailure(OSError):
    pass


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


def encode_response(payload: dict[str, Any]) -> bytes:
    return (json.dumps(_jsonable(payload), separators=(",", ":")) + "\n").encode("utf-8")


class ProtocolSession:
    """Per-connection dispatcher; owns the sessions this connection created."""

    def __init__(self, manager: SessionManager):
        self.manager = manager
        self.session_ids: list[str] = []
        self.default_session: str | None = None

    def handle_line(self, line: bytes) -> dict[str, Any]:
        try:
            msg = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            return {"error": "bad_json", "detail": str(exc)}
        if not isinstance(msg, dict):
            return {"error": "bad_json", "detail": "each line must be a JSON object"}
        cmd = msg.get("cmd")
        try:
            if cmd == "hello":
                return hello_payload()
            if cmd == "configure":
                return self._configure(msg)
            if cmd == "reset":
                return self._reset(msg)
            if cmd == "step":
                return self._step(msg)
            if cmd == "close":
                return self._close(msg)
        except SessionError as exc:
            return {"error": exc.code, "detail": exc.detail}
        except Exception as exc:  # the protocol must never crash the worker
            return {"error": "internal", "detail": f"{type(exc).__name__}: {exc}"}
        return {"error": "unknown_cmd", "detail": f"unsupported cmd {cmd!r}"}

    def _configure(self, msg: dict) -> dict:
        if "scenario" not in msg:
            raise SessionError("bad_request", "configure needs a scenario")
        sess = self.manager.configure(
            scenario=str(msg["scenario"]),
            controller=msg.get("controller"),
            seed=int(msg.get("seed", 0)),
            overrides=msg.get("overrides"),
        )
        self.session_ids.append(sess.session_id)
        self.default_session = sess.session_id
        return {
            "ok": True,
            "session": sess.session_id,
            "scenario": sess.scenario,
            "controller": sess.controller,
            "seed": sess.seed,
        }

    def _session_id(self, msg: dict) -> str:
        sid = msg.get("session", self.default_session)
        if sid is None:
            raise SessionError("not_configured", "send configure first")
        return str(sid)

    def _reset(self, msg: dict) -> dict:
        sid = self._session_id(msg)
        obs = self.manager.reset(sid, msg.get("seed"))
        return {"obs": obs, "session": sid}

    def _step(self, msg: dict) -> dict:
        sid = self._session_id(msg)
        if "action" not in msg:
            raise SessionError("bad_action", "step needs an action")
        out = self.manager.step(sid, msg["action"])
        out["session"] = sid
        return out

    def _close(self, msg: dict) -> dict:
        sid = self._session_id(msg)
        self.manager.close(sid)
        if sid in self.session_ids:
            self.session_ids.remove(sid)
        if self.default_session == sid:
            self.default_session = self.session_ids[-1] if self.session_ids else None
        return {"ok": True, "session": sid}

    def cleanup(self) -> None:
        for sid in self.session_ids:
            self.manager.close(sid)
        self.session_ids.clear()


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        proto = ProtocolSession(self.server.manager)  # type: ignore[attr-defined]
        try:
            for line in self.rfile:
                line = line.strip()
                if not line:
                    continue
                self.wfile.write(encode_response(proto.handle_line(line)))
                self.wfile.flush()
        except (ConnectionError, BrokenPipeError):
            pass
        finally:
            proto.cleanup()


class EnvServer(socketserver.ThreadingTCPServer):
    """Threaded accept loop; one worker per connection, sessions isolated."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, host: str = "127.0.0.1", port: int = 7431,
                 max_sessions: int = 64):
        self.manager = SessionManager(max_sessions=max_sessions)
        try:
            super().__init__((host, port), _Handler)
        except OSError as exc:
            raise BindFailure(f"cannot bind {host}:{port}: {exc}") from exc

    @property
    def address(self) -> tuple[str, int]:
        return self.server_address[:2]


def serve_forever(host: str, port: int, max_sessions: int = 64) -> None:
    with EnvServer(host, port, max_sessions) as server:
        print(f"environment protocol on {server.address[0]}:{server.address[1]}")
        server.serve_forever()


def serve_stdio(stdin: BinaryIO, stdout: BinaryIO, max_sessions: int = 64) -> None:
    """Same protocol over stdin/stdout for subprocess embedding."""
    manager = SessionManager(max_sessions=max_sessions)
    proto = ProtocolSession(manager)
    try:
        for line in stdin:
            line = line.strip()
            if not line:
                continue
            stdout.write(encode_response(proto.handle_line(line)))
            stdout.flush()
    finally:
        proto.cleanup()
