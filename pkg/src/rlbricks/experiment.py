"""Training and evaluation loops, result tracking, and checkpointing.

The training loop is algorithm-agnostic: it only calls ``act``, ``observe``
and ``learn`` on the agent, so swapping one algorithm id for another in the
config never touches loop code. All randomness derives from the single
experiment seed through fixed stream offsets (env +0, nets +1, sampling +2,
eval +3, bonus +4).

Run artifacts: ``config.json`` (written before the first environment step),
``train_log.csv`` (one row per finished episode), ``eval_log.csv`` (one row
per evaluation), ``checkpoint.json`` (rewritten at every evaluation and at
the end), and ``run_meta.json`` (completion marker with wall-clock timing;
clock readings stay out of the CSV logs so identical configs reproduce them
byte for byte).
"""

from __future__ import annotations

import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .agents import Agent, make_agent
from .buffers import Transition
from .config import ConfigTree, from_dict, to_dict, to_json, validate
from .envs import make
from .rng import STREAM_OFFSETS, split_streams

CHECKPOINT_VERSION = 1

TRAIN_COLUMNS = ("step", "episode", "ep_return", "ep_length",
                 "loss_actor", "loss_critic", "loss_alpha", "alpha", "wall_s")
EVAL_COLUMNS = ("step", "mean_return", "std_return", "episodes")


class RunExistsError(RuntimeError):
    """The output directory already holds a completed run."""


@dataclass
class RunArtifacts:
    out_dir: Path
    config_path: Path
    train_log: Path
    eval_log: Path
    checkpoint: Path
    steps_run: int
    final_eval_mean: Optional[float]


def _fmt(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _train_row(step: int, episode: int, ep_return: float, ep_length: int,
               report: Dict[str, float]) -> str:
    cells = [step, episode, float(ep_return), ep_length,
             report.get("loss_actor"), report.get("loss_critic"),
             report.get("loss_alpha"), report.get("alpha"), None]
    return ",".join(_fmt(c) for c in cells) + "\n"


def evaluate_policy(agent: Agent, env_id: str, episodes: int, seed: int) -> List[float]:
    """Run the deterministic policy; episode i resets with seed + i."""
    env = make(env_id)
    returns: List[float] = []
    for i in range(episodes):
        obs = env.reset(seed=seed + i)
        total = 0.0
        while True:
            result = env.step(agent.act(obs, deterministic=True))
            total += result.reward
            obs = result.observation
            if result.terminated or result.truncated:
                break
        returns.append(total)
    return returns


def save_checkpoint(path: Path, agent: Agent, tree: ConfigTree) -> None:
    params = {
        name: {"shape": list(arr.shape), "values": arr.reshape(-1).tolist()}
        for name, arr in agent.named_arrays().items()
    }
    doc = {
        "version": CHECKPOINT_VERSION,
        "algo_id": tree.experiment.algo_id,
        "config": to_dict(tree),
        "params": params,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"))


def load_checkpoint(path: str) -> Tuple[Agent, ConfigTree]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValueError(f"corrupt checkpoint {path}: {exc}") from exc
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(
            f"checkpoint version {doc.get('version')!r} unsupported (expected {CHECKPOINT_VERSION})")
    tree = from_dict(doc["config"])
    env = make(tree.experiment.env_id)
    agent = make_agent(tree, env, split_streams(tree.experiment.seed))
    arrays = {
        name: np.asarray(entry["values"], dtype=np.float64).reshape(entry["shape"])
        for name, entry in doc["params"].items()
    }
    agent.load_arrays(arrays)
    return agent, tree


def train(tree: ConfigTree, force: bool = False) -> RunArtifacts:
    """Run one training job to completion and return the artifact paths."""
    validate(tree)
    exp = tree.experiment
    out = Path(exp.out_dir)
    meta_path = out / "run_meta.json"
    if meta_path.exists() and not force:
        raise RunExistsError(f"{out} already contains a completed run (use force to overwrite)")
    out.mkdir(parents=True, exist_ok=True)

    config_path = out / "config.json"
    config_path.write_text(to_json(tree) + "\n", encoding="utf-8")

    streams = split_streams(exp.seed)
    eval_seed = exp.seed + STREAM_OFFSETS["eval"]
    env = make(exp.env_id)
    agent = make_agent(tree, env, streams)

    train_path = out / "train_log.csv"
    eval_path = out / "eval_log.csv"
    ckpt_path = out / "checkpoint.json"

    started = time.monotonic()
    final_eval_mean: Optional[float] = None
    steps_run = 0
    with open(train_path, "w", encoding="utf-8", newline="") as train_log, \
            open(eval_path, "w", encoding="utf-8", newline="") as eval_log:
        train_log.write(",".join(TRAIN_COLUMNS) + "\n")
        eval_log.write(",".join(EVAL_COLUMNS) + "\n")

        obs = env.reset(seed=exp.seed + STREAM_OFFSETS["env"])
        episode = 0
        ep_return, ep_length = 0.0, 0
        last_report: Dict[str, float] = {}

        for step in range(1, exp.total_steps + 1):
            steps_run = step
            action = agent.act(obs)
            result = env.step(action)
            agent.observe(Transition(obs, action, result.reward, result.observation,
                                     result.terminated, result.truncated))
            ep_return += result.reward
            ep_length += 1

            if step % tree.algo.update_every == 0:
                report = agent.learn()
                if report:
                    last_report = report

            if result.terminated or result.truncated:
                episode += 1
                train_log.write(_train_row(step, episode, ep_return, ep_length, last_report))
                obs = env.reset()
                ep_return, ep_length = 0.0, 0
            else:
                obs = result.observation

            if step % exp.eval_every == 0:
                returns = evaluate_policy(agent, exp.env_id, exp.eval_episodes, eval_seed)
                mean = float(np.mean(returns))
                std = float(np.std(returns))
                eval_log.write(",".join(
                    _fmt(c) for c in (step, mean, std, exp.eval_episodes)) + "\n")
                save_checkpoint(ckpt_path, agent, tree)
                final_eval_mean = mean
                print(f"step {step}: eval mean return {mean:.2f}", file=sys.stderr)
                if exp.stop_return is not None and mean >= exp.stop_return:
                    break

    save_checkpoint(ckpt_path, agent, tree)
    meta = {
        "status": "complete",
        "steps_run": steps_run,
        "elapsed_s": time.monotonic() - started,
        "final_eval_mean": final_eval_mean,
    }
    meta_path.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return RunArtifacts(out, config_path, train_path, eval_path, ckpt_path,
                        steps_run, final_eval_mean)


def evaluate(checkpoint_path: str, episodes: int, seed: int) -> Tuple[float, List[float]]:
    """Deterministic evaluation of a stored policy; no learning happens."""
    agent, tree = load_checkpoint(checkpoint_path)
    returns = evaluate_policy(agent, tree.experiment.env_id, episodes, seed)
    return float(np.mean(returns)), returns


def _read_eval_log(run_dir: Path) -> Tuple[str, str, List[Tuple[int, float]]]:
    config = json.loads((run_dir / "config.json").read_text(encoding="utf-8"))
    env_id = config["experiment"]["env_id"]
    algo_id = config["experiment"]["algo_id"]
    rows: List[Tuple[int, float]] = []
    lines = (run_dir / "eval_log.csv").read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != ",".join(EVAL_COLUMNS):
        raise ValueError("eval_log.csv header mismatch")
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != len(EVAL_COLUMNS):
            raise ValueError(f"ragged eval_log.csv row: {line!r}")
        rows.append((int(parts[0]), float(parts[1])))
    if not rows:
        raise ValueError("eval_log.csv has no evaluation rows")
    return env_id, algo_id, rows


def report(run_dirs: Sequence[str]) -> str:
    """Aggregate eval logs across runs into a CSV summary (returned and printed).

    Two sections: final returns per (env, algo) across seeds, then the
    learning-curve aggregation at each evaluation step. Unreadable runs are
    reported on stderr and skipped.
    """
    groups: Dict[Tuple[str, str], List[List[Tuple[int, float]]]] = {}
    for raw in run_dirs:
        run_dir = Path(raw)
        try:
            env_id, algo_id, rows = _read_eval_log(run_dir)
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            print(f"report: skipping {run_dir}: {exc}", file=sys.stderr)
            continue
        groups.setdefault((env_id, algo_id), []).append(rows)

    lines = ["env,algo,runs,final_mean,final_std"]
    for (env_id, algo_id), runs in sorted(groups.items()):
        finals = np.array([rows[-1][1] for rows in runs])
        lines.append(",".join(
            _fmt(c) for c in (env_id, algo_id, len(runs),
                              float(finals.mean()), float(finals.std()))))
    lines.append("")
    lines.append("env,algo,step,mean_return,std_return,runs")
    for (env_id, algo_id), runs in sorted(groups.items()):
        by_step: Dict[int, List[float]] = {}
        for rows in runs:
            for step, mean in rows:
                by_step.setdefault(step, []).append(mean)
        for step in sorted(by_step):
            vals = np.array(by_step[step])
            lines.append(",".join(
                _fmt(c) for c in (env_id, algo_id, step,
                                  float(vals.mean()), float(vals.std()), len(vals))))
    text = "\n".join(lines) + "\n"
    return text
