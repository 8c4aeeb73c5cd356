"""Agent registry and the shared class ontology."""

from __future__ import annotations

from typing import Dict, Type

from ..config import ConfigTree
from ..envs import Env
from ..rng import Rng
from .base import (
    ActorCritic,
    ActorOutput,
    Agent,
    CriticEnsemble,
    polyak_update,
    reduce_ensemble,
)
from .ddpg import DDPG
from .dqn import DQN
from .drnd import DRND, DRNDBonus
from .ppo import PPO
from .sac import SAC
from .td3 import TD3

AGENT_CLASSES: Dict[str, Type[Agent]] = {
    "dqn": DQN,
    "ddpg": DDPG,
    "td3": TD3,
    "sac": SAC,
    "ppo": PPO,
    "drnd": DRND,
}

__all__ = [
    "Agent", "ActorCritic", "ActorOutput", "CriticEnsemble",
    "polyak_update", "reduce_ensemble",
    "DQN", "DDPG", "TD3", "SAC", "PPO", "DRND", "DRNDBonus",
    "AGENT_CLASSES", "make_agent",
]


def make_agent(tree: ConfigTree, env: Env, rngs: Dict[str, Rng]) -> Agent:
    algo_id = tree.experiment.algo_id
    if algo_id not in AGENT_CLASSES:
        raise ValueError(f"unknown algorithm id {algo_id!r}")
    obs_dim = env.observation_space.dim
    return AGENT_CLASSES[algo_id](tree, obs_dim, env.action_space, rngs)
