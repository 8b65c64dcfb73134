"""Command-line interface: run / ablate / eval."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import envs
from .agent import SacAgent
from .config import ExperimentConfig
from .errors import PrefrlError
from .metrics import format_table, write_summary_csv
from .runner import RunStatus, ablation_suite, evaluate, run
from .server import FeedbackApiServer, parse_bind_address
from .teacher import HumanLabelInbox


def _config_from_args(args):
    overrides = {
        "env": args.env,
        "seed": str(args.seed) if args.seed is not None else None,
        "teacher": args.teacher,
        "budget": str(args.budget) if args.budget is not None else None,
        "ssl": args.ssl,
        "tda": args.tda,
        "out_dir": args.out,
    }
    if args.config:
        return ExperimentConfig.from_file(args.config, overrides)
    values = {k: v for k, v in overrides.items() if v is not None}
    return ExperimentConfig.from_strings(values)


def _cmd_run(args):
    config = _config_from_args(args)
    config.validate()

    out_dir = Path(config.out_dir) if config.out_dir else None
    metrics_path = None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        config.to_file(out_dir / "config.txt")
        metrics_path = out_dir / "metrics.jsonl"

    inbox = None
    server = None
    status = RunStatus(budget=config.budget)
    if config.teacher == "human":
        inbox = HumanLabelInbox()
    if args.serve:
        if inbox is None:
            inbox = HumanLabelInbox()  # status-only serving in scripted mode
        host, port = parse_bind_address(args.serve)
        server = FeedbackApiServer(inbox, status, host, port)
        print(f"label API listening on http://{server.start()}/api/", flush=True)

    try:
        result = run(config, inbox=inbox, status=status, metrics_path=metrics_path)
    finally:
        if server is not None:
            server.stop()

    if out_dir:
        result.agent.save(out_dir / "agent.npz", extra_meta={"env": config.env})
        result.ensemble.save(out_dir / "reward.npz")
        result.buffer.save(out_dir / "buffer.npz")
    print(f"labels used: {result.labels_used}/{config.budget}")
    if result.final_return is not None:
        print(f"final true return (mean of {config.eval_episodes} episodes): "
              f"{result.final_return:.4f}")
    if result.heldout_accuracy is not None:
        print(f"reward-model held-out accuracy: {result.heldout_accuracy:.3f}")
    return 0


def _cmd_ablate(args):
    config = _config_from_args(args)
    config.validate()
    rows = ablation_suite(config, seeds=args.seeds, sweep=args.sweep)
    print(format_table(rows))
    if config.out_dir:
        out_dir = Path(config.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_summary_csv(rows, out_dir / "ablation.csv")
        print(f"wrote {out_dir / 'ablation.csv'}")
    return 0


def _cmd_eval(args):
    agent, meta = SacAgent.load(args.checkpoint)
    env_name = args.env or meta.get("env")
    if not env_name:
        print("checkpoint carries no env name; pass --env", file=sys.stderr)
        return 2
    env = envs.make(env_name)
    ret = evaluate(agent, env, args.episodes, args.seed)
    print(f"mean true return over {args.episodes} episodes: {ret:.4f}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="prefrl",
        description="Preference-based RL with semi-supervised reward learning",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("--config", help="key=value config file")
    p_run.add_argument("--env", choices=envs.env_names())
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--teacher", choices=("scripted", "human"))
    p_run.add_argument("--budget", type=int)
    p_run.add_argument("--ssl", choices=("on", "off"))
    p_run.add_argument("--tda", choices=("on", "off"))
    p_run.add_argument("--serve", metavar="ADDR", help="bind the label API (host:port)")
    p_run.add_argument("--out", metavar="DIR", help="output directory")
    p_run.set_defaults(func=_cmd_run)

    p_abl = sub.add_parser("ablate", help="component ablation or hyperparameter sweep")
    p_abl.add_argument("--config", help="key=value config file")
    p_abl.add_argument("--seeds", type=int, default=3)
    p_abl.add_argument("--sweep", choices=("mu", "tau", "lambda"))
    p_abl.add_argument("--env", choices=envs.env_names())
    p_abl.add_argument("--seed", type=int)
    p_abl.add_argument("--out", metavar="DIR")
    p_abl.set_defaults(func=_cmd_ablate, teacher=None, budget=None, ssl=None, tda=None)

    p_eval = sub.add_parser("eval", help="evaluate a saved agent checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--env", choices=envs.env_names())
    p_eval.add_argument("--episodes", type=int, default=5)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.set_defaults(func=_cmd_eval)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PrefrlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
