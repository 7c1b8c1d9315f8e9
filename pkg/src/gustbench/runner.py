"""Batch episode execution with NDJSON trajectory logging.

One log file per episode: a meta record, one record per policy step, and a
result record with the per-gate outcomes. Floats go through json.dumps, whose
repr round-trips binary64 exactly, so logs are replay-faithful.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .config import ScenarioConfig, load_scenario
from .env import Environment
from .metrics import aggregate_directory, format_table
from .policy import MlpPolicy, ScriptedPolicy, parse_policy_spec


def _jsonable(x: Any) -> Any:
    if isinstance(x, np.ndarray):
        return [float(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def run_episode(
    env: Environment,
    policy: "ScriptedPolicy | MlpPolicy",
    seed: int,
    log_path: Path | None = None,
    deterministic: bool = True,
    max_steps: int | None = None,
) -> dict:
    """Run one episode to termination; returns the result record."""
    obs = env.reset(seed)
    lines: list[str] = []
    meta = {"type": "meta", **env.episode_meta}
    lines.append(json.dumps(_jsonable(meta)))
    rng = np.random.default_rng(seed)
    total_reward = 0.0
    steps = 0
    result: dict[str, Any] = {}
    while True:
        if isinstance(policy, MlpPolicy):
            action = policy.act(obs, deterministic=deterministic, rng=None if deterministic else rng)
        else:
            action = policy.act(obs)
        res = env.step(action)
        obs = res.obs
        steps += 1
        total_reward += res.reward
        st = env.state
        lines.append(
            json.dumps(
                _jsonable(
                    {
                        "type": "step",
                        "t": st.t,
                        "p": st.p,
                        "v": st.v,
                        "q": st.q,
                        "omega": st.omega,
                        "v_des": res.info["v_des"],
                        "v_wind": res.info["v_wind"],
                        "f_w": res.info["f_w"],
                        "reward": res.reward,
                        "reward_terms": res.info["reward_terms"],
                        "events": res.info["events"],
                    }
                )
            )
        )
        if res.done or (max_steps is not None and steps >= max_steps):
            info = res.info
            result = {
                "type": "result",
                "seed": seed,
                "scenario": env.config.name,
                "controller": env.config.controller_type,
                "cause": info.get("cause", "max-steps"),
                "completed": bool(info.get("completed", False)),
                "missed": int(info["missed"]),
                "hits": int(info["hits"]),
                "outcomes": info.get("outcomes", []),
                "steps": steps,
                "duration_s": st.t,
                "total_reward": total_reward,
            }
            lines.append(json.dumps(_jsonable(result)))
            break
    if log_path is not None:
        log_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return result


def run_batch(
    scenario: str,
    controller: str | None,
    policy_spec: str,
    trials: int,
    out_dir: str | Path,
    seed_base: int = 0,
    deterministic: bool = True,
) -> list[dict]:
    """Run N seeded trials, write per-episode logs plus a summary."""
    cfg = load_scenario(scenario).with_controller(controller)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    policy = parse_policy_spec(policy_spec, cfg.v_cap)
    results = []
    for i in range(trials):
        seed = seed_base + i
        env = Environment(cfg)
        name = f"{cfg.name}_{cfg.controller_type}_seed{seed:04d}.ndjson"
        results.append(
            run_episode(env, policy, seed, out / name, deterministic=deterministic)
        )
    summaries = aggregate_directory(out)
    with open(out / "summary.ndjson", "w", encoding="utf-8") as fh:
        for s in summaries:
            fh.write(json.dumps(_jsonable(s.to_record())) + "\n")
    (out / "summary.txt").write_text(format_table(summaries) + "\n", encoding="utf-8")
    return results
