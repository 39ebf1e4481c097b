"""Command line entry points: validate models, replay trajectories, run
built-in scenarios, and launch the streaming service."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import InputError, ModelError, TrajectoryError
from .harness import (
    SCENARIOS,
    load_config_file,
    load_trajectory,
    replay,
    run_scenario,
)
from .kinematics import bundled_model_path, load_model, model_from_dict


def _load_model_and_doc(path: str | None):
    path = path or bundled_model_path()
    with open(path) as fh:
        doc = json.load(fh)
    return model_from_dict(doc), doc


def _out_paths(out_dir: str | None):
    """Resolve (log_path, summary_path) inside --out, creating the dir."""
    if not out_dir:
        return None, None
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, "log.jsonl"), os.path.join(out_dir, "summary.json")


def _write_json(path: str | None, payload: dict):
    if path:
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")


def _parse_listen(listen: str) -> tuple[str, int]:
    host, sep, port = listen.rpartition(":")
    if not sep or not host:
        raise InputError(f"listen address must be host:port, got {listen!r}")
    try:
        return host, int(port)
    except ValueError:
        raise InputError(f"listen port must be an integer, got {port!r}") from None


def cmd_check_model(args) -> int:
    try:
        model = load_model(args.path)
    except (ModelError, InputError, OSError, json.JSONDecodeError) as exc:
        print(f"invalid model: {exc}", file=sys.stderr)
        return 2
    print(f"model {model.name!r} is valid")
    print(f"  joints: {model.n_joints}  links: {model.n_links}")
    print(f"  frames: {', '.join(sorted(model.task_frames))}")
    groups = ", ".join(f"{k}({len(v)})" for k, v in model.joint_groups.items())
    print(f"  groups: {groups}")
    print(
        f"  collision: {len(model.collision_bodies)} bodies, "
        f"{len(model.collision_pairs)} pairs"
    )
    return 0


def cmd_replay(args) -> int:
    try:
        model, _ = _load_model_and_doc(args.model)
        solver_cfg, retarget_cfg = load_config_file(args.config)
        samples = load_trajectory(args.trajectory)
    except (ModelError, InputError, TrajectoryError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    log_path, summary_path = _out_paths(args.out)
    result = replay(model, samples, solver_cfg, retarget_cfg, log_path=log_path)
    _write_json(summary_path, result.summary)
    s = result.summary
    print(f"replayed {len(samples)} samples over {s['ticks']} ticks ({s['duration']:.2f} s)")
    if s["ticks"]:
        st = s["solve_time"]
        print(f"  min clearance: {s['min_h']:.4f} m")
        print(
            "  solve time: mean {mean:.6f} p95 {p95:.6f} p99 {p99:.6f} max {max:.6f} s".format(
                **st
            )
        )
    return 0


def cmd_scenario(args) -> int:
    try:
        model, _ = _load_model_and_doc(args.model)
        run = run_scenario(args.name, model, seed=args.seed)
    except (ModelError, InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    log_path, summary_path = _out_paths(args.out)
    if log_path:
        with open(log_path, "w") as fh:
            for d in run.result.tick_dicts:
                fh.write(json.dumps(d) + "\n")
    _write_json(summary_path, {"outcome": vars(run.outcome), "summary": run.result.summary})
    out = run.outcome
    print(f"scenario {out.name}: {'PASS' if out.passed else 'FAIL'} ({out.notes})")
    for key, value in out.metrics.items():
        print(f"  {key}: {value}")
    return 0 if out.passed else 1


def cmd_serve(args) -> int:
    from .service import serve

    try:
        host, port = _parse_listen(args.listen)
        model, doc = _load_model_and_doc(args.model)
        solver_cfg, retarget_cfg = load_config_file(args.config)
    except (ModelError, InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    mode = "lockstep" if args.rate == 0 else f"{args.rate:g} Hz"
    print(f"serving {model.name} on {host}:{port} ({mode})")
    serve(
        model,
        doc,
        solver_cfg,
        retarget_cfg,
        host=host,
        port=port,
        rate=args.rate,
        ui_dir=args.ui,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="teleik", description="teleoperation retargeting tools"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-model", help="validate a kinematic model file")
    p.add_argument("path")
    p.set_defaults(fn=cmd_check_model)

    p = sub.add_parser("replay", help="run a recorded trajectory offline")
    p.add_argument("--trajectory", required=True, help="JSONL tracker samples")
    p.add_argument("--model", help="model JSON (default: bundled)")
    p.add_argument("--config", help="solver/retarget config JSON")
    p.add_argument("--out", help="directory for log.jsonl and summary.json")
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("scenario", help="run a built-in scenario")
    p.add_argument("name", choices=sorted(SCENARIOS))
    p.add_argument("--model", help="model JSON (default: bundled)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="directory for log.jsonl and summary.json")
    p.set_defaults(fn=cmd_scenario)

    p = sub.add_parser("serve", help="run the WebSocket streaming service")
    p.add_argument("--model", help="model JSON (default: bundled)")
    p.add_argument("--config", help="solver/retarget config JSON")
    p.add_argument("--listen", default="127.0.0.1:8733", help="bind address as host:port")
    p.add_argument(
        "--rate",
        type=float,
        default=60.0,
        help="tick rate in Hz; 0 switches to lockstep (tick on command)",
    )
    p.add_argument("--ui", help="directory of static UI files to mount at /")
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
