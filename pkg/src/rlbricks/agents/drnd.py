"""Exploration-bonus extension of the soft actor-critic agent.

The bonus measures state-action novelty with an ensemble of frozen random
feature networks and one trained predictor: prediction error against the
mean target feature plus the across-target feature variance, averaged over
the feature dimension. Extending the base agent takes two method overrides
(the actor's loss and the critic's Bellman target), one new component, and
one extra predictor-update call.
"""

from __future__ import annotations

from typing import Dict, List, Tuple

import numpy as np

from ..autodiff import Tensor, backward, concat_cols, no_grad
from ..buffers import Batch
from ..config import ConfigTree
from ..nets import MLPSpec
from ..optim import Adam
from ..rng import Rng
from .base import (
    ActorOutput,
    CriticEnsemble,
    MLP,
    SquashedGaussianActor,
    _named_tensors_of_mlp,
)
from .sac import SAC, SACCritic


class DRNDBonus:
    """Ensemble-based novelty estimate b(s, a) >= 0.

    Holds M randomly initialized target feature networks that stay frozen for
    the whole run, plus one predictor network trained to match a per-sample
    random target. Both the prediction error and the target disagreement feed
    the bonus.
    """

    def __init__(self, obs_dim: int, act_dim: int, n_targets: int, feature_dim: int,
                 hidden: List[int], activation: str, rng: Rng, lr: float):
        spec = MLPSpec(obs_dim + act_dim, list(hidden), feature_dim,
                       activation=activation, head="q-value")
        self.targets = [MLP(spec, rng) for _ in range(n_targets)]
        for target in self.targets:
            for p in target.params:
                p.requires_grad = False
        self.predictor = MLP(spec, rng)
        self.optimizer = Adam(self.predictor.params, lr=lr)
        self.rng = rng
        self.n_targets = n_targets

    def _features(self, states: Tensor, actions: Tensor) -> Tuple[Tensor, List[Tensor]]:
        x = concat_cols(states, actions)
        return self.predictor(x), [t(x) for t in self.targets]

    def bonus_tensor(self, states: Tensor, actions: Tensor) -> Tensor:
        """Differentiable per-sample bonus, shape (n,)."""
        pred, feats = self._features(states, actions)
        mu = feats[0]
        for f in feats[1:]:
            mu = mu + f
        mu = mu * (1.0 / self.n_targets)
        err = (pred - mu).square().mean(axis=1)
        var = None
        for f in feats:
            term = (f - mu).square()
            var = term if var is None else var + term
        return err + (var * (1.0 / self.n_targets)).mean(axis=1)

    def bonus(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Bonus values outside the graph (used inside Bellman targets)."""
        with no_grad():
            out = self.bonus_tensor(Tensor(states), Tensor(actions))
        return out.values

    def predictor_update(self, states: np.ndarray, actions: np.ndarray) -> float:
        """One regression step of the predictor toward per-sample random targets."""
        picks = self.rng.integers(self.n_targets, size=states.shape[0])
        with no_grad():
            x = concat_cols(Tensor(states), Tensor(actions))
            stacked = np.stack([t(x).values for t in self.targets])  # (M, n, k)
        chosen = stacked[picks, np.arange(states.shape[0]), :]

        pred, _ = self._features(Tensor(states), Tensor(actions))
        loss = (pred - Tensor(chosen)).square().mean()
        value = loss.item()
        self.optimizer.step(backward(loss, params=self.predictor.params))
        return value

    def named(self, prefix: str = "bonus") -> Dict[str, np.ndarray]:
        out = self.predictor.named(f"{prefix}_predictor")
        for i, t in enumerate(self.targets):
            out.update(t.named(f"{prefix}_target{i}"))
        return out


class DRNDActor(SquashedGaussianActor):
    """The base entropy-regularized loss plus the scaled exploration bonus."""

    def loss(self, state: Tensor, critics: CriticEnsemble) -> Tuple[Tensor, ActorOutput]:
        loss, act_dict = super().loss(state, critics)
        bonus = self.bonus_ensemble.bonus_tensor(state, act_dict["action"]).mean()
        return loss + bonus * self.lambda_actor, act_dict


class DRNDCritic(SACCritic):
    """Bellman target with the novelty bonus subtracted inside the bootstrap."""

    def get_bellman_target(self, batch: Batch, ctx: Dict[str, object]) -> np.ndarray:
        bonus = self.bonus_ensemble.bonus(batch.next_states, ctx["next_action"])
        target_reduced = self.target_reduced(batch.next_states, ctx["next_action"])
        bootstrap = (target_reduced - ctx["alpha"] * ctx["log_prob"]
                     - self.lambda_critic * bonus)
        return batch.rewards + self.gamma * (1.0 - batch.terminated) * bootstrap


class DRND(SAC):
    """SAC extended with the novelty bonus; the training loop is unchanged."""

    report_keys = ("loss_actor", "loss_critic", "loss_alpha", "alpha", "loss_predictor")
    critic_cls = DRNDCritic
    actor_cls = DRNDActor

    def __init__(self, tree: ConfigTree, obs_dim: int, act_space, rngs: Dict[str, Rng]):
        algo = tree.algo
        self.bonus = DRNDBonus(
            obs_dim, act_space.dim, algo.bonus_ensemble, algo.bonus_feature_dim,
            tree.nets.hidden, tree.nets.activation, rngs["bonus"], lr=algo.lr_critic)
        super().__init__(tree, obs_dim, act_space, rngs)
        self.actor.bonus_ensemble = self.bonus
        self.actor.lambda_actor = algo.lambda_actor
        self.critic.bonus_ensemble = self.bonus
        self.critic.lambda_critic = algo.lambda_critic

    def _update(self, batch: Batch) -> Dict[str, float]:
        report = super()._update(batch)
        report["loss_predictor"] = self.bonus.predictor_update(batch.states, batch.actions)
        return report

    def _component_arrays(self) -> Dict[str, np.ndarray]:
        out = super()._component_arrays()
        out.update(self.bonus.named("bonus"))
        return out

    def _optimizers(self) -> Dict[str, Adam]:
        out = super()._optimizers()
        out["bonus"] = self.bonus.optimizer
        return out

    def _named_param_tensors(self):
        out = super()._named_param_tensors()
        out.update(_named_tensors_of_mlp(self.bonus.predictor, "bonus_predictor"))
        for i, t in enumerate(self.bonus.targets):
            out.update(_named_tensors_of_mlp(t, f"bonus_target{i}"))
        return out
