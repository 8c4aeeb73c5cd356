"""Deterministic policy gradient over a continuous action box."""

from __future__ import annotations

from typing import Dict

from ..autodiff import Tensor, no_grad
from ..buffers import Batch
from ..config import ConfigTree
from ..envs import Box
from ..nets import MLPSpec
from ..rng import Rng
from .base import Actor, ActorCritic, BoundedDeterministicActor


class DDPG(ActorCritic):
    """Actor ascends the critic; critic regresses on plain Bellman targets.

    Exploration is additive Gaussian noise on the tanh-bounded policy output.
    """

    report_keys = ("loss_actor", "loss_critic")

    def __init__(self, tree: ConfigTree, obs_dim: int, act_space, rngs: Dict[str, Rng]):
        if not isinstance(act_space, Box):
            raise ValueError(f"{type(self).__name__.lower()} needs a box action space")
        super().__init__(tree, obs_dim, act_space, rngs)

    def _build_actor(self) -> Actor:
        spec = MLPSpec(self.obs_dim, list(self.nets_cfg.hidden), self.act_space.dim,
                       activation=self.nets_cfg.activation, head="deterministic-bounded")
        return BoundedDeterministicActor(spec, self.rng_nets, self.rng_sample,
                                         lr=self.cfg.lr_actor, act_noise=self.cfg.act_noise)

    def _target_context(self, batch: Batch) -> Dict[str, object]:
        with no_grad():
            next_action = self.actor.forward_action(
                Tensor(batch.next_states), self.actor.target).values
        return {"next_action": next_action}
