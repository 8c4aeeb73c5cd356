"""Twin-critic deterministic policy gradient with smoothed, delayed updates."""

from __future__ import annotations

from typing import Dict

import numpy as np

from ..autodiff import Tensor, no_grad
from ..buffers import Batch
from ..config import ConfigTree
from ..rng import Rng
from .ddpg import DDPG


class TD3(DDPG):
    """DDPG plus target policy smoothing, min-clipped twin targets, and a
    delayed actor: the policy moves only every ``policy_delay``-th update."""

    def __init__(self, tree: ConfigTree, obs_dim: int, act_space, rngs: Dict[str, Rng]):
        super().__init__(tree, obs_dim, act_space, rngs)
        if self.critic.n_members < 2:
            raise ValueError("td3 needs at least two critic ensemble members")

    def _target_context(self, batch: Batch) -> Dict[str, object]:
        with no_grad():
            next_action = self.actor.forward_action(
                Tensor(batch.next_states), self.actor.target).values
        clip = self.cfg.target_noise_clip
        noise = np.clip(self.cfg.target_noise * self.rng_sample.normal(next_action.shape),
                        -clip, clip)
        return {"next_action": np.clip(next_action + noise, -1.0, 1.0)}

    def _update_actor(self, batch: Batch) -> Dict[str, float]:
        if self.update_count % self.cfg.policy_delay != 0:
            return {}
        return super()._update_actor(batch)
