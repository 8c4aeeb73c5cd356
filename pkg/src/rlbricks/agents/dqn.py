"""Q-learning on a discrete action set with a hard-copied target network."""

from __future__ import annotations

from typing import Dict

import numpy as np

from ..autodiff import Tensor, backward, gather_rows, no_grad
from ..buffers import Batch
from ..config import ConfigTree
from ..envs import Discrete
from ..nets import MLPSpec
from ..optim import Adam
from ..rng import Rng
from .base import MLP, Agent, _named_tensors_of_mlp


class DQN(Agent):
    """Deep Q-network with epsilon-greedy exploration, linearly annealed."""

    report_keys = ("loss_critic", "epsilon")

    def __init__(self, tree: ConfigTree, obs_dim: int, act_space, rngs: Dict[str, Rng]):
        if not isinstance(act_space, Discrete):
            raise ValueError("dqn needs a discrete action space")
        super().__init__(tree, obs_dim, act_space, rngs)
        self.n_actions = act_space.n
        spec = MLPSpec(obs_dim, list(self.nets_cfg.hidden), self.n_actions,
                       activation=self.nets_cfg.activation, head="q-value")
        self.q = MLP(spec, self.rng_nets)
        self.q_target = self.q.frozen_copy()
        self.optimizer = Adam(self.q.params, lr=self.cfg.lr_critic)

    @property
    def epsilon(self) -> float:
        if self.global_step >= self.cfg.epsilon_decay_steps:
            return self.cfg.epsilon_end
        frac = self.global_step / self.cfg.epsilon_decay_steps
        return self.cfg.epsilon_start + frac * (self.cfg.epsilon_end - self.cfg.epsilon_start)

    def _greedy(self, obs: np.ndarray) -> int:
        with no_grad():
            q = self.q(Tensor(obs.reshape(1, -1))).values[0]
        return int(np.argmax(q))

    def act(self, obs: np.ndarray, deterministic: bool = False) -> int:
        arr = self._check_obs(obs)
        if deterministic:
            return self._greedy(arr)
        if float(self.rng_sample.uniform(0.0, 1.0)) < self.epsilon:
            return int(self.rng_sample.integers(self.n_actions))
        return self._greedy(arr)

    def _update(self, batch: Batch) -> Dict[str, float]:
        with no_grad():
            q_next = self.q_target(Tensor(batch.next_states)).values
        targets = batch.rewards + self.cfg.gamma * (1.0 - batch.terminated) * q_next.max(axis=1)

        q_all = self.q(Tensor(batch.states))
        q_taken = gather_rows(q_all, batch.actions)
        loss = (q_taken - Tensor(targets)).square().mean()
        value = loss.item()
        self.optimizer.step(backward(loss, params=self.q.params))

        if self.update_count % self.cfg.target_copy_every == 0:
            self.q_target.copy_values_from(self.q)
        return {"loss_critic": value, "epsilon": self.epsilon}

    def _component_arrays(self) -> Dict[str, np.ndarray]:
        out = self.q.named("q")
        out.update(self.q_target.named("q_target"))
        return out

    def _optimizers(self) -> Dict[str, Adam]:
        return {"q": self.optimizer}

    def _named_param_tensors(self):
        out = _named_tensors_of_mlp(self.q, "q")
        out.update(_named_tensors_of_mlp(self.q_target, "q_target"))
        return out
