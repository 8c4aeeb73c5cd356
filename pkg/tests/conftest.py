"""Shared test helpers."""

import numpy as np
import pytest

from rlbricks.config import defaults, merge


def tiny_tree(algo_id, env_id, **overrides):
    """A defaults tree shrunk for fast unit tests; overrides use dotted keys."""
    base = {
        "nets.hidden": [8],
        "algo.batch_size": 8,
        "algo.warmup_steps": 4,
        "algo.replay_capacity": 512,
        "algo.rollout_steps": 16,
        "algo.minibatches": 2,
        "algo.ppo_epochs": 2,
        "experiment.total_steps": 64,
        "experiment.eval_every": 32,
        "experiment.eval_episodes": 1,
    }
    base.update(overrides)
    return merge(defaults(algo_id, env_id), [base])


@pytest.fixture
def rng():
    return np.random.default_rng(0)
