"""Entropy-regularized actor-critic with an auto-tuned temperature."""

from __future__ import annotations

from typing import Dict

import numpy as np

from ..autodiff import Tensor, backward, no_grad
from ..buffers import Batch
from ..config import ConfigTree
from ..envs import Box
from ..nets import MLPSpec
from ..optim import Adam
from ..rng import Rng
from .base import Actor, ActorCritic, CriticEnsemble, SquashedGaussianActor


class SACCritic(CriticEnsemble):
    """Critic whose Bellman target subtracts the entropy term from the bootstrap."""

    def get_bellman_target(self, batch: Batch, ctx: Dict[str, object]) -> np.ndarray:
        target_reduced = self.target_reduced(batch.next_states, ctx["next_action"])
        bootstrap = target_reduced - ctx["alpha"] * ctx["log_prob"]
        return batch.rewards + self.gamma * (1.0 - batch.terminated) * bootstrap


class SAC(ActorCritic):
    """Soft actor-critic: squashed Gaussian actor, min-clipped twin critics,
    temperature tuned toward a target entropy of -action_dim."""

    report_keys = ("loss_actor", "loss_critic", "loss_alpha", "alpha")
    critic_cls = SACCritic
    actor_cls = SquashedGaussianActor

    def __init__(self, tree: ConfigTree, obs_dim: int, act_space, rngs: Dict[str, Rng]):
        if not isinstance(act_space, Box):
            raise ValueError(f"{type(self).__name__.lower()} needs a box action space")
        super().__init__(tree, obs_dim, act_space, rngs)
        self.log_alpha = Tensor(np.zeros(()), requires_grad=True)
        self.alpha_optimizer = Adam([self.log_alpha], lr=self.cfg.lr_alpha)
        self.target_entropy = -float(act_space.dim)

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha.values))

    def _build_actor(self) -> Actor:
        spec = MLPSpec(self.obs_dim, list(self.nets_cfg.hidden), self.act_space.dim,
                       activation=self.nets_cfg.activation, head="gaussian")
        return self.actor_cls(spec, self.rng_nets, self.rng_sample,
                              lr=self.cfg.lr_actor,
                              bounds=(self.act_space.low, self.act_space.high))

    def _target_context(self, batch: Batch) -> Dict[str, object]:
        with no_grad():
            nxt = self.actor.sample(Tensor(batch.next_states), deterministic=False)
        return {
            "next_action": nxt.action.values,
            "log_prob": nxt.log_prob.values,
            "alpha": self.alpha,
        }

    def _update_actor(self, batch: Batch) -> Dict[str, float]:
        alpha = self.alpha
        self.actor.temperature = alpha
        loss, act_dict = self.actor.loss(Tensor(batch.states), self.critic)
        loss_actor = loss.item()
        self.actor.step(loss)

        # temperature step on log(alpha); the policy's log-probs enter as constants
        entropy_gap = float(np.mean(act_dict.log_prob.values) + self.target_entropy)
        loss_alpha = self.log_alpha * (-entropy_gap)
        loss_alpha_value = loss_alpha.item()
        self.alpha_optimizer.step(backward(loss_alpha, params=[self.log_alpha]))

        return {"loss_actor": loss_actor, "loss_alpha": loss_alpha_value, "alpha": alpha}

    def _component_arrays(self) -> Dict[str, np.ndarray]:
        out = super()._component_arrays()
        out["log_alpha"] = self.log_alpha.values.reshape(1)
        return out

    def _optimizers(self) -> Dict[str, Adam]:
        out = super()._optimizers()
        out["alpha"] = self.alpha_optimizer
        return out

    def _assign_arrays(self, arrays) -> None:
        super()._assign_arrays(arrays)
        self.log_alpha.values = np.asarray(arrays["log_alpha"], dtype=np.float64).reshape(())
