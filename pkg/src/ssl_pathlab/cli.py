"""Command-line entry point: train, eval, rollout, plot, serve.

Each run writes its fully resolved config next to its outputs; pointing
--config back at that file reproduces the run. Exit code 0 on success,
nonzero with a one-line reason otherwise.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .agent import CheckpointError, SACAgent
from .config import (
    ConfigError,
    RunConfig,
    default_seed,
    load_run_config,
    run_config_from_dict,
)
from .envs import ENV_NAMES
from .evaluation import (
    aggregate_report,
    export_trajectory,
    run_episodes,
    scripted_target_policy,
    summarize,
)
from .trainer import build_env, train


def _common_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (e.g. a config.json "
                   "written by a previous run)")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE",
                   help="override a config entry, e.g. sac.lr_actor=1e-4")
    p.add_argument("--env", choices=ENV_NAMES)
    p.add_argument("--setup",
                   choices=("vanilla", "frameskip", "caps", "fscaps"))
    p.add_argument("--seed", type=int)


def _flag_overrides(args, mapping: dict) -> list[str]:
    items = []
    for attr, key in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            items.append(f"{key}={json.dumps(value)}")
    return items


def _build_run_config(args, extra: dict) -> RunConfig:
    mapping = {"env": "env", "setup": "setup", "seed": "seed", **extra}
    overrides = list(args.overrides) + _flag_overrides(args, mapping)
    return load_run_config(args.config, overrides)


def _load_policy(args, env):
    """Return (policy callable, label) from --policy/--checkpoint flags."""
    if args.policy == "target":
        return scripted_target_policy, "target"
    if not args.checkpoint:
        raise ConfigError("provide --checkpoint PATH or --policy target")
    agent = SACAgent.load(args.checkpoint)
    if agent.obs_dim != env.observation_dim:
        raise ConfigError(
            f"checkpoint expects {agent.obs_dim}-dim observations but env "
            f"emits {env.observation_dim}")
    return (lambda obs: agent.select_action(obs, deterministic=True),
            "checkpoint")


def cmd_train(args) -> int:
    run_cfg = _build_run_config(args, {
        "steps": "total_env_steps",
        "eval_every": "eval_every",
        "eval_episodes": "eval_episodes",
        "final_eval_episodes": "final_eval_episodes",
        "output_dir": "output_dir",
    })
    log = None if args.quiet else lambda msg: print(msg, file=sys.stderr)
    summary = train(run_cfg, log=log)
    print(json.dumps({k: v for k, v in summary.items() if k != "report"},
                     indent=2, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    if args.n < 1:
        raise ConfigError("-n must be at least 1 (empty evaluation)")
    run_cfg = _build_run_config(args, {})
    env = build_env(run_cfg)
    policy, label = _load_policy(args, env)
    seed = args.seed if args.seed is not None else default_seed()
    records = run_episodes(env, policy, n=args.n, seed=seed)

    report = aggregate_report(records, run_cfg.env_config, run_cfg.env,
                              run_cfg.setup)
    report["policy"] = label
    report["seed"] = seed
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n")

    lines = ["index,seed,length_steps,decisions,cpad,succeeded,collided,"
             "truncated"]
    for i, r in enumerate(records):
        lines.append(",".join([
            str(i), str(r.seed), str(r.length_steps), str(r.decisions),
            repr(r.cpad(run_cfg.env_config)), str(int(r.succeeded)),
            str(int(r.collided)), str(int(r.truncated))]))
    (out / "episodes.csv").write_text("\n".join(lines) + "\n")

    from .plotting import plot_eval_summary
    plot_eval_summary([r.length_steps for r in records],
                      [r.cpad(run_cfg.env_config) for r in records],
                      out / "summary.png",
                      title=f"{run_cfg.env}/{run_cfg.setup} ({label})")

    for i in range(min(args.export_episodes, len(records))):
        export_trajectory(records[i], out / f"episode_{i:03d}",
                          run_cfg.env_config)

    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_rollout(args) -> int:
    run_cfg = _build_run_config(args, {})
    env = build_env(run_cfg)
    policy, _ = _load_policy(args, env)
    seed = args.seed if args.seed is not None else default_seed()
    records = run_episodes(env, policy, n=1, seed=seed)
    record = records[0]
    csv_path, svg_path = export_trajectory(record, args.out,
                                           run_cfg.env_config)
    from .plotting import plot_trajectory_record
    png_path = plot_trajectory_record(record, run_cfg.env_config,
                                      Path(csv_path).with_suffix(".png"))
    print(json.dumps({
        "csv": str(csv_path), "svg": str(svg_path), "png": str(png_path),
        "length_steps": record.length_steps,
        "decisions": record.decisions,
        "cpad": record.cpad(run_cfg.env_config),
        "succeeded": record.succeeded,
        "collided": record.collided,
    }, indent=2, sort_keys=True))
    return 0


def cmd_plot(args) -> int:
    from . import plotting
    if bool(args.metrics) == bool(args.trajectory):
        raise ConfigError("provide exactly one of --metrics or --trajectory")
    run_cfg = _build_run_config(args, {})
    if args.metrics:
        out = plotting.plot_metrics(args.metrics, args.out)
    else:
        out = plotting.plot_trajectory_csv(args.trajectory,
                                           run_cfg.env_config, args.out)
    print(str(out))
    return 0


def cmd_serve(args) -> int:
    from . import protocol
    default_config = {}
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            default_config[key] = json.loads(raw)
        except json.JSONDecodeError:
            default_config[key] = raw
    if args.transport == "stdio":
        protocol.serve_stdio(args.env, default_config)
    else:
        protocol.serve_tcp(args.host, args.port, args.env, default_config,
                           announce=lambda msg: print(msg, flush=True),
                           max_sessions=args.max_sessions)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssl-pathlab",
        description="Path-planning RL lab: goal-conditioned environments, "
                    "SAC training, and trajectory evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an agent for one setup")
    _common_run_flags(p)
    p.add_argument("--steps", type=int, dest="steps",
                   help="total env-step budget")
    p.add_argument("--eval-every", type=int, dest="eval_every")
    p.add_argument("--eval-episodes", type=int, dest="eval_episodes")
    p.add_argument("--final-eval-episodes", type=int,
                   dest="final_eval_episodes")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint or scripted "
                       "policy over seeded episodes")
    _common_run_flags(p)
    p.add_argument("--checkpoint")
    p.add_argument("--policy", choices=("checkpoint", "target"),
                   default="checkpoint")
    p.add_argument("-n", type=int, default=1000,
                   help="number of evaluation episodes")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--export-episodes", type=int, default=0,
                   help="also export the first K episodes as CSV+SVG")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rollout", help="run one episode and export its "
                       "trajectory (CSV, SVG, PNG)")
    _common_run_flags(p)
    p.add_argument("--checkpoint")
    p.add_argument("--policy", choices=("checkpoint", "target"),
                   default="checkpoint")
    p.add_argument("--out", required=True,
                   help="output base path (suffixes are added)")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("plot", help="render figures from run logs")
    _common_run_flags(p)
    p.add_argument("--metrics", help="metrics.csv from a training run")
    p.add_argument("--trajectory", help="trajectory CSV from rollout/eval")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("serve", help="serve the line-delimited JSON env "
                       "protocol")
    p.add_argument("--env", choices=ENV_NAMES,
                   help="default env when make omits one")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE",
                   help="default env config entries for make")
    p.add_argument("--transport", choices=("stdio", "tcp"), default="stdio")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--max-sessions", type=int, default=None,
                   help="stop after serving this many TCP sessions")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
