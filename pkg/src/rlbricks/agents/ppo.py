"""Clipped-surrogate policy optimization over on-policy rollouts."""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

import numpy as np

from ..autodiff import Tensor, backward, gather_rows, minimum, no_grad, reshape
from ..buffers import RolloutBuffer, Transition
from ..config import ConfigTree
from ..envs import Discrete
from ..nets import MLPSpec, gaussian_log_prob
from ..optim import Adam
from ..rng import Rng
from .base import (
    Agent,
    CategoricalActor,
    MLP,
    SquashedGaussianActor,
    _named_tensors_of_mlp,
    gather_cols,
)


class PPO(Agent):
    """On-policy actor plus a state-value critic.

    Collects ``rollout_steps`` transitions, finalizes advantages, then runs
    several epochs of shuffled minibatch updates on the clipped surrogate.
    Advantages are normalized per minibatch. For box action spaces the
    rollout stores the pre-squash action so the new policy's log-density of
    an old action is evaluated without inverting tanh.
    """

    report_keys = ("loss_actor", "loss_critic", "entropy")

    def __init__(self, tree: ConfigTree, obs_dim: int, act_space, rngs: Dict[str, Rng]):
        super().__init__(tree, obs_dim, act_space, rngs)
        self.gamma = self.cfg.gamma
        self.discrete = isinstance(act_space, Discrete)
        hidden = list(self.nets_cfg.hidden)
        if self.discrete:
            spec = MLPSpec(obs_dim, hidden, act_space.n,
                           activation=self.nets_cfg.activation, head="plain")
            self.actor = CategoricalActor(spec, self.rng_nets, self.rng_sample,
                                          lr=self.cfg.lr_actor)
        else:
            spec = MLPSpec(obs_dim, hidden, act_space.dim,
                           activation=self.nets_cfg.activation, head="gaussian")
            self.actor = SquashedGaussianActor(spec, self.rng_nets, self.rng_sample,
                                               lr=self.cfg.lr_actor,
                                               bounds=(act_space.low, act_space.high))
        value_spec = MLPSpec(obs_dim, hidden, 1,
                             activation=self.nets_cfg.activation, head="q-value")
        self.value_net = MLP(value_spec, self.rng_nets)
        self.value_optimizer = Adam(self.value_net.params, lr=self.cfg.lr_critic)
        self.rollout = RolloutBuffer(self.cfg.rollout_steps)
        self._pending: Optional[Tuple[float, float, Optional[np.ndarray]]] = None

    # -- interaction ----------------------------------------------------

    def _value_of(self, obs: np.ndarray) -> float:
        with no_grad():
            v = self.value_net(Tensor(obs.reshape(1, -1))).values
        return float(v[0, 0])

    def act(self, obs: np.ndarray, deterministic: bool = False):
        arr = self._check_obs(obs)
        if deterministic:
            return self.actor.act(arr, True)
        if self.discrete:
            action, lp = self.actor.sample_with_log_prob(arr)
            self._pending = (lp, self._value_of(arr), None)
            return action
        with no_grad():
            out = self.actor.sample(Tensor(arr.reshape(1, -1)), deterministic=False)
        self._pending = (float(out.log_prob.values[0]), self._value_of(arr),
                         out.pre_tanh.values[0].copy())
        return out.action.values[0].copy()

    def observe(self, transition: Transition) -> None:
        self.global_step += 1
        if self._pending is None:
            raise RuntimeError("observe called without a preceding stochastic act")
        log_prob, value, pre_tanh = self._pending
        self._pending = None
        stored = transition if pre_tanh is None else Transition(
            transition.state, pre_tanh, transition.reward, transition.next_state,
            transition.terminated, transition.truncated)
        self.rollout.add(stored, value, log_prob)

    # -- learning --------------------------------------------------------

    @property
    def ready(self) -> bool:
        return self.rollout.full

    def learn(self) -> Optional[Dict[str, float]]:
        if not self.ready:
            return None
        self.update_count += 1
        report = self._update_from_rollout()
        self.rollout.reset()
        return report

    def _policy_terms(self, states: Tensor, actions) -> Tuple[Tensor, Tensor]:
        """New log-probs of old actions and a differentiable entropy term."""
        if self.discrete:
            lp_full = self.actor.log_probs(states)
            new_lp = gather_rows(lp_full, actions)
            entropy = -(lp_full.exp() * lp_full).sum(axis=1).mean()
        else:
            raw = self.actor.net(states)
            d = self.actor.net.spec.output_dim
            mean = gather_cols(raw, 0, d)
            log_std = gather_cols(raw, d, 2 * d)
            new_lp = gaussian_log_prob(mean, log_std, Tensor(actions), self.actor.bounds)
            entropy = -new_lp.mean()
        return new_lp, entropy

    def _update_from_rollout(self) -> Dict[str, float]:
        if self.rollout.terminated[-1]:
            bootstrap = 0.0
        else:
            bootstrap = self._value_of(self.rollout.last_next_state)
        self.rollout.finalize(bootstrap, self.gamma, self.cfg.gae_lambda)

        states = np.stack(self.rollout.states)
        if self.discrete:
            actions = np.array([int(a) for a in self.rollout.actions], dtype=np.int64)
        else:
            actions = np.stack([np.asarray(a, dtype=np.float64) for a in self.rollout.actions])
        old_lp = np.array(self.rollout.log_probs)
        advantages = self.rollout.advantages
        returns = self.rollout.returns
        n = len(self.rollout)
        lo, hi = 1.0 - self.cfg.clip_ratio, 1.0 + self.cfg.clip_ratio

        actor_losses: List[float] = []
        value_losses: List[float] = []
        entropies: List[float] = []
        for _ in range(self.cfg.ppo_epochs):
            perm = self.rng_sample.permutation(n)
            for mb in np.array_split(perm, self.cfg.minibatches):
                adv = advantages[mb]
                adv = (adv - adv.mean()) / (adv.std() + 1e-8)
                s = Tensor(states[mb])
                new_lp, entropy = self._policy_terms(s, actions[mb])
                ratio = (new_lp - Tensor(old_lp[mb])).exp()
                adv_t = Tensor(adv)
                surrogate = minimum(ratio * adv_t, ratio.clamp(lo, hi) * adv_t)
                policy_loss = -surrogate.mean()
                actor_loss = policy_loss - entropy * self.cfg.entropy_coef
                actor_losses.append(policy_loss.item())
                entropies.append(entropy.item())
                self.actor.step(actor_loss)

                v = reshape(self.value_net(s), (len(mb),))
                value_loss = (v - Tensor(returns[mb])).square().mean()
                value_losses.append(value_loss.item())
                self.value_optimizer.step(
                    backward(value_loss, params=self.value_net.params))

        return {
            "loss_actor": float(np.mean(actor_losses)),
            "loss_critic": float(np.mean(value_losses)),
            "entropy": float(np.mean(entropies)),
        }

    # -- checkpointing -----------------------------------------------------

    def _component_arrays(self) -> Dict[str, np.ndarray]:
        out = self.actor.named("actor")
        out.update(self.value_net.named("value"))
        return out

    def _optimizers(self) -> Dict[str, Adam]:
        return {"actor": self.actor.optimizer, "value": self.value_optimizer}

    def _named_param_tensors(self):
        out = _named_tensors_of_mlp(self.actor.net, "actor")
        out.update(_named_tensors_of_mlp(self.value_net, "value"))
        return out
