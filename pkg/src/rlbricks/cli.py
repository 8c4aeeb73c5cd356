"""Command-line surface: train, evaluate, report."""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

from .config import ALGO_IDS, ConfigError, defaults, load_file, merge
from .envs import ENV_IDS
from .experiment import evaluate, report, train


def _parse_set(pairs: List[str]) -> dict:
    partial = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw  # bare strings are fine, e.g. --set nets.activation=tanh
        partial[key] = value
    return partial


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rlbricks",
                                     description="Train and evaluate RL agents.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one training job")
    p_train.add_argument("--algo", required=True, choices=ALGO_IDS)
    p_train.add_argument("--env", required=True, choices=ENV_IDS)
    p_train.add_argument("--seed", required=True, type=int)
    p_train.add_argument("--steps", required=True, type=int)
    p_train.add_argument("--config", help="JSON config file merged over defaults")
    p_train.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                         help="config override, highest precedence")
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.add_argument("--force", action="store_true",
                         help="overwrite a completed run in --out")

    p_eval = sub.add_parser("evaluate", help="evaluate a stored checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--episodes", required=True, type=int)
    p_eval.add_argument("--seed", required=True, type=int)

    p_report = sub.add_parser("report", help="summarize finished runs")
    p_report.add_argument("run_dirs", nargs="+")
    return parser


def _run_train(args) -> int:
    base = defaults(args.algo, args.env)
    overrides = []
    if args.config:
        overrides.append(load_file(args.config))
    cli_partial = {
        "experiment.seed": args.seed,
        "experiment.total_steps": args.steps,
        "experiment.out_dir": args.out,
    }
    cli_partial.update(_parse_set(args.set))
    overrides.append(cli_partial)
    tree = merge(base, overrides)
    artifacts = train(tree, force=args.force)
    final = "" if artifacts.final_eval_mean is None \
        else f", final eval mean {artifacts.final_eval_mean:.2f}"
    print(f"run complete: {artifacts.out_dir} ({artifacts.steps_run} steps{final})")
    return 0


def _run_evaluate(args) -> int:
    mean, returns = evaluate(args.checkpoint, args.episodes, args.seed)
    print(f"mean_return,{mean!r}")
    for i, ret in enumerate(returns):
        print(f"episode_{i},{ret!r}")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            return _run_train(args)
        if args.command == "evaluate":
            return _run_evaluate(args)
        sys.stdout.write(report(args.run_dirs))
        return 0
    except Exception as exc:  # CLI contract: one-line diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
