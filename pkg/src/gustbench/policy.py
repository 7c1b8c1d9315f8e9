"""Deterministic MLP policy inference and the portable weights container.

The weights file (magic "GBPW1") is a UTF-8 JSON header line followed by a
raw little-endian float32 payload, checksummed with SHA-256. The layout is
self-describing so a trainer in any language can produce it; see
docs/weights_format.md for the byte-level contract.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"GBPW1\n"
WEIGHTS_VERSION = 1
HIDDEN_SIZES = (512, 256, 256, 128)


class WeightsError(ValueError):
    pass


class BadChecksum(WeightsError):
    pass


class ShapeMismatch(WeightsError):
    pass


class UnsupportedVersion(WeightsError):
    pass


class NonFiniteOutput(RuntimeError):
    pass


@dataclass
class MlpPolicy:
    """Shared-trunk actor-critic MLP with tanh hidden activations.

    hidden: list of (W, b); heads: action mean, state-independent log-std,
    scalar value. Action means/samples are clamped to [-1, 1].
    """

    hidden: list[tuple[np.ndarray, np.ndarray]]
    mean_w: np.ndarray
    mean_b: np.ndarray
    log_std: np.ndarray
    value_w: np.ndarray
    value_b: np.ndarray
    obs_dim: int = 20
    act_dim: int = 4
    activation: str = "tanh"
    run_id: str = ""

    def __post_init__(self) -> None:
        if self.activation != "tanh":
            raise ShapeMismatch(f"unsupported activation {self.activation!r}")
        dim = self.obs_dim
        for i, (w, b) in enumerate(self.hidden):
            if w.shape[1] != dim or b.shape != (w.shape[0],):
                raise ShapeMismatch(f"hidden layer {i} does not chain: {w.shape}")
            dim = w.shape[0]
        if self.mean_w.shape != (self.act_dim, dim):
            raise ShapeMismatch(f"mean head shape {self.mean_w.shape}")
        if self.log_std.shape != (self.act_dim,):
            raise ShapeMismatch(f"log_std shape {self.log_std.shape}")
        if self.value_w.shape != (1, dim):
            raise ShapeMismatch(f"value head shape {self.value_w.shape}")
        for arr in self._tensors():
            if not np.all(np.isfinite(arr)):
                raise WeightsError("weights contain non-finite values")

    def _tensors(self) -> list[np.ndarray]:
        out = []
        for w, b in self.hidden:
            out.extend([w, b])
        out.extend([self.mean_w, self.mean_b, self.log_std, self.value_w, self.value_b])
        return out

    def forward(self, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
        """Returns (action mean pre-clamp, log_std, value)."""
        x = np.asarray(obs, dtype=float)
        if x.shape != (self.obs_dim,):
            raise ShapeMismatch(f"observation shape {x.shape}, want ({self.obs_dim},)")
        for w, b in self.hidden:
            x = np.tanh(w @ x + b)
        mean = self.mean_w @ x + self.mean_b
        value = float(self.value_w @ x + self.value_b)
        if not (np.all(np.isfinite(mean)) and math.isfinite(value)):
            raise NonFiniteOutput("policy produced non-finite output")
        return mean, self.log_std.copy(), value

    def act(
        self,
        obs: np.ndarray,
        deterministic: bool = True,
        rng: np.random.Generator | None = None,
    ) -> np.ndarray:
        mean, log_std, _ = self.forward(obs)
        if deterministic:
            return np.clip(mean, -1.0, 1.0)
        if rng is None:
            raise ValueError("stochastic action needs an rng")
        sample = mean + np.exp(log_std) * rng.standard_normal(self.act_dim)
        return np.clip(sample, -1.0, 1.0)

    @classmethod
    def zeros(cls, obs_dim: int = 20, act_dim: int = 4,
              hidden_sizes: tuple[int, ...] = HIDDEN_SIZES) -> "MlpPolicy":
        hidden = []
        dim = obs_dim
        for h in hidden_sizes:
            hidden.append((np.zeros((h, dim)), np.zeros(h)))
            dim = h
        return cls(
            hidden=hidden,
            mean_w=np.zeros((act_dim, dim)),
            mean_b=np.zeros(act_dim),
            log_std=np.zeros(act_dim),
            value_w=np.zeros((1, dim)),
            value_b=np.zeros(1),
            obs_dim=obs_dim,
            act_dim=act_dim,
        )


def _tensor_entries(policy: MlpPolicy) -> list[tuple[str, np.ndarray]]:
    entries = []
    for i, (w, b) in enumerate(policy.hidden):
        entries.append((f"h{i}.w", w))
        entries.append((f"h{i}.b", b))
    entries.append(("mean.w", policy.mean_w))
    entries.append(("mean.b", policy.mean_b))
    entries.append(("logstd", policy.log_std))
    entries.append(("value.w", policy.value_w))
    entries.append(("value.b", policy.value_b))
    return entries


def save_weights(policy: MlpPolicy, path: str, run_id: str = "") -> None:
    entries = _tensor_entries(policy)
    payload = b"".join(
        np.ascontiguousarray(arr, dtype="<f4").tobytes() for _, arr in entries
    )
    header = {
        "version": WEIGHTS_VERSION,
        "obs_dim": policy.obs_dim,
        "act_dim": policy.act_dim,
        "activation": policy.activation,
        "run_id": run_id or policy.run_id,
        "dtype": "f32",
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
        "tensors": [
            {"name": name, "shape": list(arr.shape)} for name, arr in entries
        ],
    }
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, separators=(",", ":")).encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload)


def load_weights(path: str) -> MlpPolicy:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise UnsupportedVersion(f"bad magic {magic!r}")
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise WeightsError(f"bad header: {exc}") from exc
        payload = fh.read()

    if header.get("version") != WEIGHTS_VERSION:
        raise UnsupportedVersion(f"unsupported version {header.get('version')}")
    if header.get("dtype") != "f32":
        raise UnsupportedVersion(f"unsupported dtype {header.get('dtype')}")
    if hashlib.sha256(payload).hexdigest() != header.get("payload_sha256"):
        raise BadChecksum("payload checksum mismatch (truncated or corrupt file)")

    tensors: dict[str, np.ndarray] = {}
    offset = 0
    for spec in header.get("tensors", []):
        shape = tuple(int(s) for s in spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = 4 * count
        if offset + nbytes > len(payload):
            raise BadChecksum("payload shorter than tensor table claims")
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
        tensors[spec["name"]] = arr.reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(payload):
        raise WeightsError("payload longer than tensor table claims")

    hidden = []
    i = 0
    while f"h{i}.w" in tensors:
        hidden.append((tensors[f"h{i}.w"], tensors[f"h{i}.b"]))
        i += 1
    try:
        policy = MlpPolicy(
            hidden=hidden,
            mean_w=tensors["mean.w"],
            mean_b=tensors["mean.b"],
            log_std=tensors["logstd"],
            value_w=tensors["value.w"],
            value_b=tensors["value.b"],
            obs_dim=int(header["obs_dim"]),
            act_dim=int(header["act_dim"]),
            activation=header.get("activation", "tanh"),
            run_id=header.get("run_id", ""),
        )
    except KeyError as exc:
        raise ShapeMismatch(f"missing tensor {exc}") from exc
    return policy


# -- scripted baseline policies ----------------------------------------------


@dataclass
class ScriptedPolicy:
    """Test-harness policies over the standard observation layout.

    kinds: "hover" (zero velocity), "straight" (fly at the active gate
    center), "fixed" (constant velocity vector).
    """

    kind: str = "straight"
    speed: float = 1.0
    v_cap: float = 2.0
    fixed_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def act(self, obs: np.ndarray) -> np.ndarray:
        if self.kind == "hover":
            return np.array([0.0, 0.0, 0.0, -1.0])
        if self.kind == "fixed":
            return self._velocity_action(self.fixed_velocity)
        if self.kind == "straight":
            rel = np.asarray(obs[12:15], dtype=float)
            n = float(np.linalg.norm(rel))
            if n < 1e-9:
                return np.array([0.0, 0.0, 0.0, -1.0])
            return self._velocity_action(rel / n * self.speed)
        raise ValueError(f"unknown scripted policy {self.kind!r}")

    def _velocity_action(self, v_des: np.ndarray) -> np.ndarray:
        speed = float(np.linalg.norm(v_des))
        if speed < 1e-9:
            return np.array([0.0, 0.0, 0.0, -1.0])
        v_max = min(speed, self.v_cap)
        cmd = 2.0 * v_max / self.v_cap - 1.0
        return np.concatenate([v_des / v_max, [cmd]])


def parse_policy_spec(spec: str, v_cap: float) -> "ScriptedPolicy | MlpPolicy":
    """CLI policy specs: scripted:hover | scripted:straight[:speed] |
    scripted:fixed:vx,vy,vz | weights:path."""
    parts = spec.split(":")
    if parts[0] == "scripted":
        if len(parts) < 2:
            raise ValueError("scripted policy needs a kind")
        kind = parts[1]
        if kind == "fixed":
            if len(parts) < 3:
                raise ValueError("scripted:fixed needs vx,vy,vz")
            vel = np.array([float(x) for x in parts[2].split(",")], dtype=float)
            return ScriptedPolicy(kind="fixed", fixed_velocity=vel, v_cap=v_cap)
        speed = float(parts[2]) if len(parts) > 2 else 1.0
        return ScriptedPolicy(kind=kind, speed=speed, v_cap=v_cap)
    if parts[0] == "weights":
        return load_weights(":".join(parts[1:]))
    raise ValueError(f"unknown policy spec {spec!r}")
