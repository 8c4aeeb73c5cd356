"""Layered hyperparameter management.

A run is described by one ConfigTree (experiment / algo / nets sections).
Trees are built from per-algorithm defaults, then overridden by JSON config
files and CLI flags, in that order of precedence. Unknown keys are hard
errors: silent typos corrupt experiments. Resolved trees are immutable in
spirit (mutate nothing after validation) and round-trip exactly through
JSON.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional, Sequence

ALGO_IDS = ("dqn", "ddpg", "td3", "sac", "ppo", "drnd")
DISCRETE_ONLY = ("dqn",)
BOX_ONLY = ("ddpg", "td3", "sac", "drnd")

ENV_ACTION_KIND = {"cartpole": "discrete", "pendulum": "box"}


class ConfigError(ValueError):
    """Invalid, unknown, or inconsistent configuration input."""


@dataclass
class ExperimentConfig:
    env_id: str = "pendulum"
    algo_id: str = "sac"
    seed: int = 0
    total_steps: int = 30_000
    eval_every: int = 2_000
    eval_episodes: int = 10
    out_dir: str = "runs/latest"
    # optional early stop: end training once an evaluation reaches this mean return
    stop_return: Optional[float] = None


@dataclass
class AlgoConfig:
    gamma: float = 0.99
    tau: float = 0.005
    lr_actor: float = 3e-4
    lr_critic: float = 3e-4
    lr_alpha: float = 3e-4
    batch_size: int = 256
    warmup_steps: int = 1_000
    update_every: int = 1
    replay_capacity: int = 100_000
    critic_ensemble: int = 2
    # deterministic-policy exploration (ddpg, td3)
    act_noise: float = 0.1
    # dqn epsilon schedule and target refresh
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 10_000
    target_copy_every: int = 1_000
    # td3 target policy smoothing
    target_noise: float = 0.2
    target_noise_clip: float = 0.5
    policy_delay: int = 2
    # ppo
    clip_ratio: float = 0.2
    gae_lambda: float = 0.95
    ppo_epochs: int = 10
    minibatches: int = 32
    entropy_coef: float = 0.0
    rollout_steps: int = 2_048
    # drnd exploration bonus
    lambda_actor: float = 1.0
    lambda_critic: float = 1.0
    bonus_ensemble: int = 3
    bonus_feature_dim: int = 32


@dataclass
class NetsConfig:
    hidden: List[int] = field(default_factory=lambda: [256, 256])
    activation: str = "relu"


@dataclass
class ConfigTree:
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    algo: AlgoConfig = field(default_factory=AlgoConfig)
    nets: NetsConfig = field(default_factory=NetsConfig)


_SECTIONS = {"experiment": ExperimentConfig, "algo": AlgoConfig, "nets": NetsConfig}


def known_keys() -> List[str]:
    keys = []
    for section, cls in _SECTIONS.items():
        keys.extend(f"{section}.{f.name}" for f in fields(cls))
    return keys


_KNOWN = None


def _known_set():
    global _KNOWN
    if _KNOWN is None:
        _KNOWN = set(known_keys())
    return _KNOWN


def defaults(algo_id: str, env_id: str) -> ConfigTree:
    """Fully populated tree for a known (algorithm, environment) pair."""
    if algo_id not in ALGO_IDS:
        raise ConfigError(f"unknown algorithm id {algo_id!r}")
    if env_id not in ENV_ACTION_KIND:
        raise ConfigError(f"unknown environment id {env_id!r}")
    tree = ConfigTree()
    tree.experiment.algo_id = algo_id
    tree.experiment.env_id = env_id
    if algo_id == "dqn":
        tree.nets.hidden = [128, 128]
        tree.algo.critic_ensemble = 1
        tree.experiment.total_steps = 200_000
    elif algo_id == "ddpg":
        tree.algo.critic_ensemble = 1
    if algo_id == "ppo":
        tree.algo.warmup_steps = 0
        tree.experiment.total_steps = 300_000 if env_id == "cartpole" else 100_000
    validate(tree)
    return tree


Partial = Dict[str, object]


def _flatten(obj: dict, prefix: str = "") -> Partial:
    out: Partial = {}
    for key, value in obj.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, f"{path}."))
        else:
            out[path] = value
    return out


def load_file(path: str) -> Partial:
    """Read a partial configuration from a JSON file.

    Accepts nested objects or flat dotted-path keys; every key must name a
    known field.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path}: top level must be a JSON object")
    partial = _flatten(raw)
    for key in partial:
        if key not in _known_set():
            raise ConfigError(f"unknown config key {key!r}")
    return partial


def _set_key(tree: ConfigTree, key: str, value) -> None:
    if key not in _known_set():
        raise ConfigError(f"unknown config key {key!r}")
    section, name = key.split(".", 1)
    target = getattr(tree, section)
    current = getattr(target, name)
    if isinstance(value, bool):
        raise ConfigError(f"{key}: booleans are not valid values here")
    if name == "hidden":
        if not isinstance(value, (list, tuple)):
            raise ConfigError("nets.hidden must be a list of widths")
        value = [int(v) for v in value]
    elif isinstance(current, int) and not isinstance(current, bool):
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{key}: expected an integer, got {value}")
        if not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected an integer")
        value = int(value)
    elif isinstance(current, float) or (name == "stop_return" and value is not None):
        if not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number")
        value = float(value)
    elif isinstance(current, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string")
    setattr(target, name, value)


def merge(base: ConfigTree, overrides: Sequence[Partial]) -> ConfigTree:
    """Apply ordered partials on top of a base tree; later partials win."""
    tree = ConfigTree(
        experiment=ExperimentConfig(**asdict(base.experiment)),
        algo=AlgoConfig(**asdict(base.algo)),
        nets=NetsConfig(**asdict(base.nets)),
    )
    for partial in overrides:
        for key, value in partial.items():
            _set_key(tree, key, value)
    validate(tree)
    return tree


def validate(tree: ConfigTree) -> None:
    exp, algo, nets = tree.experiment, tree.algo, tree.nets
    if exp.algo_id not in ALGO_IDS:
        raise ConfigError(f"unknown algorithm id {exp.algo_id!r}")
    if exp.env_id not in ENV_ACTION_KIND:
        raise ConfigError(f"unknown environment id {exp.env_id!r}")
    kind = ENV_ACTION_KIND[exp.env_id]
    if exp.algo_id in DISCRETE_ONLY and kind != "discrete":
        raise ConfigError(f"{exp.algo_id} needs a discrete action space, {exp.env_id} is continuous")
    if exp.algo_id in BOX_ONLY and kind != "box":
        raise ConfigError(f"{exp.algo_id} needs a continuous action space, {exp.env_id} is discrete")

    if exp.total_steps < 0:
        raise ConfigError("experiment.total_steps must be >= 0")
    if exp.eval_every < 1:
        raise ConfigError("experiment.eval_every must be >= 1")
    if exp.eval_episodes < 1:
        raise ConfigError("experiment.eval_episodes must be >= 1")

    if not 0.0 < algo.gamma <= 1.0:
        raise ConfigError("algo.gamma must lie in (0, 1]")
    if not 0.0 <= algo.tau <= 1.0:
        raise ConfigError("algo.tau must lie in [0, 1]")
    for name in ("lr_actor", "lr_critic", "lr_alpha"):
        if getattr(algo, name) <= 0.0:
            raise ConfigError(f"algo.{name} must be positive")
    for name in ("batch_size", "update_every", "replay_capacity", "critic_ensemble",
                 "epsilon_decay_steps", "target_copy_every", "policy_delay",
                 "ppo_epochs", "minibatches", "rollout_steps",
                 "bonus_ensemble", "bonus_feature_dim"):
        if getattr(algo, name) < 1:
            raise ConfigError(f"algo.{name} must be >= 1")
    if algo.warmup_steps < 0:
        raise ConfigError("algo.warmup_steps must be >= 0")
    if not 0.0 < algo.clip_ratio < 1.0:
        raise ConfigError("algo.clip_ratio must lie in (0, 1)")
    if not 0.0 <= algo.gae_lambda <= 1.0:
        raise ConfigError("algo.gae_lambda must lie in [0, 1]")
    if not 0.0 <= algo.epsilon_end <= algo.epsilon_start <= 1.0:
        raise ConfigError("epsilon schedule needs 0 <= end <= start <= 1")
    if algo.act_noise < 0 or algo.target_noise < 0 or algo.target_noise_clip < 0:
        raise ConfigError("noise scales must be nonnegative")
    if algo.minibatches > algo.rollout_steps:
        raise ConfigError("algo.minibatches cannot exceed algo.rollout_steps")
    if exp.algo_id == "td3" and algo.critic_ensemble < 2:
        raise ConfigError("td3 needs a critic ensemble of at least 2")
    if exp.algo_id == "ppo" and algo.update_every != 1:
        raise ConfigError("ppo paces its own updates; algo.update_every must be 1")

    if any(int(w) < 1 for w in nets.hidden):
        raise ConfigError("nets.hidden widths must all be >= 1")
    if nets.activation not in ("relu", "tanh"):
        raise ConfigError(f"unknown activation {nets.activation!r}")


def to_dict(tree: ConfigTree) -> dict:
    return asdict(tree)


def from_dict(data: dict) -> ConfigTree:
    flat = _flatten(data)
    for key in flat:
        if key not in _known_set():
            raise ConfigError(f"unknown config key {key!r}")
    tree = ConfigTree()
    for key, value in flat.items():
        _set_key(tree, key, value)
    validate(tree)
    return tree


def to_json(tree: ConfigTree) -> str:
    return json.dumps(to_dict(tree), indent=2)


def from_json(text: str) -> ConfigTree:
    return from_dict(json.loads(text))
