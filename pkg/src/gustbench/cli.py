"""gustbench command line: thin front end over the runner and services.

Subcommands: serve (TCP protocol / stdio), serve-http (HTTP service), run
(batch trials to NDJSON logs), eval (aggregate logs into the summary table),
scenario list, policy-eval (forward-pass check for exported weights).
GUSTBENCH_CONFIG may point to a JSON file of defaults merged under every
scenario (see config.py).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError
from .metrics import EmptyLog, aggregate_directory, format_table


def _cmd_serve(args: argparse.Namespace) -> int:
    from .tcpserver import BindFailure, serve_forever, serve_stdio

    if args.stdio:
        serve_stdio(sys.stdin.buffer, sys.stdout.buffer, max_sessions=args.max_sessions)
        return 0
    try:
        serve_forever(args.host, args.port, max_sessions=args.max_sessions)
    except BindFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def _cmd_serve_http(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="warning")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    from .runner import run_batch

    try:
        results = run_batch(
            scenario=args.scenario,
            controller=args.controller,
            policy_spec=args.policy,
            trials=args.trials,
            out_dir=args.out,
            seed_base=args.seed_base,
            deterministic=not args.stochastic,
        )
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    completed = sum(1 for r in results if r["completed"])
    print(f"{len(results)} trials, {completed} completed; logs in {args.out}")
    print((Path(args.out) / "summary.txt").read_text(), end="")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    try:
        summaries = aggregate_directory(args.log_dir)
    except (EmptyLog, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    table = format_table(summaries)
    print(table)
    out = Path(args.out) if args.out else Path(args.log_dir) / "summary.ndjson"
    with open(out, "w", encoding="utf-8") as fh:
        for s in summaries:
            fh.write(json.dumps(s.to_record()) + "\n")
    return 0


def _cmd_scenario(args: argparse.Namespace) -> int:
    from .config import builtin_scenario_names, load_scenario

    if args.action == "list":
        for name in builtin_scenario_names():
            cfg = load_scenario(name)
            print(f"{name:<8} {cfg.description}")
        return 0
    print(f"error: unknown scenario action {args.action!r}", file=sys.stderr)
    return 1


def _cmd_policy_eval(args: argparse.Namespace) -> int:
    from .policy import MlpPolicy, WeightsError, load_weights

    try:
        policy = load_weights(args.weights)
    except WeightsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    obs_batch = json.loads(Path(args.obs_file).read_text(encoding="utf-8"))
    out = []
    for obs in obs_batch:
        mean, log_std, value = policy.forward(np.asarray(obs, dtype=float))
        out.append(
            {
                "action": [float(v) for v in np.clip(mean, -1.0, 1.0)],
                "mean": [float(v) for v in mean],
                "log_std": [float(v) for v in log_std],
                "value": value,
            }
        )
    print(json.dumps(out))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gustbench", description=__doc__)
    p.add_argument("--version", action="version", version=f"gustbench {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("serve", help="run the newline-JSON environment protocol server")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=7431)
    s.add_argument("--max-sessions", type=int, default=64)
    s.add_argument("--stdio", action="store_true", help="serve over stdin/stdout instead of TCP")
    s.set_defaults(func=_cmd_serve)

    s = sub.add_parser("serve-http", help="run the HTTP session service")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    s.set_defaults(func=_cmd_serve_http)

    s = sub.add_parser("run", help="run seeded trials and write trajectory logs")
    s.add_argument("--scenario", required=True, help="builtin name or path to a scenario JSON")
    s.add_argument("--controller", choices=["indi", "pid"], default=None)
    s.add_argument("--policy", default="scripted:straight",
                   help="scripted:hover|straight[:speed]|fixed:vx,vy,vz or weights:PATH")
    s.add_argument("--trials", type=int, default=10)
    s.add_argument("--seed-base", type=int, default=0)
    s.add_argument("--stochastic", action="store_true", help="sample the policy instead of its mean")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_run)

    s = sub.add_parser("eval", help="aggregate a log directory into the summary table")
    s.add_argument("log_dir")
    s.add_argument("--out", default=None, help="summary NDJSON path (default: <log_dir>/summary.ndjson)")
    s.set_defaults(func=_cmd_eval)

    s = sub.add_parser("scenario", help="scenario utilities")
    s.add_argument("action", choices=["list"])
    s.set_defaults(func=_cmd_scenario)

    s = sub.add_parser("policy-eval", help="run a weights file over observations (parity checks)")
    s.add_argument("--weights", required=True)
    s.add_argument("--obs-file", required=True, help="JSON array of observation arrays")
    s.set_defaults(func=_cmd_policy_eval)

    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
