"""Agent class ontology: base agent, actor-critic skeleton, actors, critic ensemble.

The training loop only ever touches the ``Agent`` surface (act / observe /
learn / state arrays). Algorithms specialize behavior by overriding small
methods: an actor's ``loss``, a critic ensemble's ``get_bellman_target``,
or the context-building hooks on ``ActorCritic``. New algorithms should
never require edits to the loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..autodiff import (
    ShapeError,
    Tensor,
    backward,
    concat_cols,
    minimum,
    no_grad,
    reshape,
)
from ..buffers import Batch, ReplayBuffer, Transition
from ..config import ConfigTree
from ..nets import MLPSpec, gaussian_sample, init_mlp, mlp_forward
from ..optim import Adam
from ..rng import Rng


def polyak_update(online: Sequence[Tensor], target: Sequence[Tensor], tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, parameter by parameter."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    if len(online) != len(target):
        raise ShapeError("online and target parameter lists differ in length")
    for src, dst in zip(online, target):
        if src.shape != dst.shape:
            raise ShapeError(f"parameter shapes differ: {src.shape} vs {dst.shape}")
        dst.values = tau * src.values + (1.0 - tau) * dst.values


def reduce_ensemble(q_values: np.ndarray, kind: str = "min") -> np.ndarray:
    """Aggregate an (N, batch) stack of member estimates across members."""
    q = np.asarray(q_values, dtype=np.float64)
    if q.ndim == 1:
        q = q.reshape(1, -1)
    if kind == "min":
        return q.min(axis=0)
    if kind == "mean":
        return q.mean(axis=0)
    raise ValueError(f"unknown reduce kind {kind!r}")


def reduce_q_tensors(qs: Sequence[Tensor], kind: str = "min") -> Tensor:
    """Differentiable member aggregation for actor losses."""
    if kind == "mean":
        total = qs[0]
        for q in qs[1:]:
            total = total + q
        return total * (1.0 / len(qs))
    out = qs[0]
    for q in qs[1:]:
        out = minimum(out, q)
    return out


class MLP:
    """An MLPSpec plus its parameters; callable on a batch tensor."""

    def __init__(self, spec: MLPSpec, rng: Optional[Rng], params: Optional[List[Tensor]] = None):
        self.spec = spec
        self.params = params if params is not None else init_mlp(spec, rng)

    def __call__(self, batch: Tensor) -> Tensor:
        return mlp_forward(self.params, self.spec, batch)

    def frozen_copy(self) -> "MLP":
        clones = [Tensor(p.values.copy(), requires_grad=False) for p in self.params]
        return MLP(self.spec, None, params=clones)

    def copy_values_from(self, other: "MLP") -> None:
        for dst, src in zip(self.params, other.params):
            dst.values = src.values.copy()

    def named(self, prefix: str) -> Dict[str, np.ndarray]:
        out = {}
        for i in range(0, len(self.params), 2):
            out[f"{prefix}.w{i // 2}"] = self.params[i].values
            out[f"{prefix}.b{i // 2}"] = self.params[i + 1].values
        return out


@dataclass
class ActorOutput:
    """What an actor produced while generating actions for a loss term."""

    action: Tensor
    log_prob: Optional[Tensor] = None
    aux: Dict[str, object] = field(default_factory=dict)

    def __getitem__(self, key: str):
        if key == "action":
            return self.action
        if key == "log_prob":
            return self.log_prob
        return self.aux[key]


class Actor:
    """Policy component: action generation plus an overridable loss method."""

    def __init__(self, spec: MLPSpec, nets_rng: Rng, sample_rng: Rng, lr: float):
        self.net = MLP(spec, nets_rng)
        self.rng = sample_rng
        self.optimizer = Adam(self.net.params, lr=lr)

    def act(self, obs: np.ndarray, deterministic: bool) -> np.ndarray:
        raise NotImplementedError

    def loss(self, state: Tensor, critics: "CriticEnsemble") -> Tuple[Tensor, ActorOutput]:
        raise NotImplementedError

    def step(self, loss: Tensor) -> None:
        self.optimizer.step(backward(loss, params=self.net.params))

    def named(self, prefix: str = "actor") -> Dict[str, np.ndarray]:
        return self.net.named(prefix)


class BoundedDeterministicActor(Actor):
    """tanh-bounded deterministic policy with a target copy (ddpg / td3 style).

    Exploration adds clipped Gaussian noise at act time; the loss ascends the
    first ensemble member's value of the chosen action.
    """

    def __init__(self, spec: MLPSpec, nets_rng: Rng, sample_rng: Rng, lr: float,
                 act_noise: float):
        super().__init__(spec, nets_rng, sample_rng, lr)
        self.target = self.net.frozen_copy()
        self.act_noise = act_noise

    def forward_action(self, states: Tensor, params: Optional[MLP] = None) -> Tensor:
        net = params if params is not None else self.net
        return net(states).tanh()

    def act(self, obs: np.ndarray, deterministic: bool) -> np.ndarray:
        with no_grad():
            a = self.forward_action(Tensor(obs.reshape(1, -1))).values[0]
        if not deterministic and self.act_noise > 0.0:
            a = a + self.act_noise * self.rng.normal(a.shape)
        return np.clip(a, -1.0, 1.0)

    def loss(self, state: Tensor, critics: "CriticEnsemble") -> Tuple[Tensor, ActorOutput]:
        action = self.forward_action(state)
        q = critics.member_q(0, state, action)
        return -q.mean(), ActorOutput(action=action)

    def sync_target(self, tau: float) -> None:
        polyak_update(self.net.params, self.target.params, tau)

    def named(self, prefix: str = "actor") -> Dict[str, np.ndarray]:
        out = self.net.named(prefix)
        out.update(self.target.named(f"{prefix}_target"))
        return out


class SquashedGaussianActor(Actor):
    """tanh-squashed Gaussian policy with entropy-regularized loss (sac style).

    ``temperature`` is refreshed by the owning agent before each loss call.
    """

    def __init__(self, spec: MLPSpec, nets_rng: Rng, sample_rng: Rng, lr: float,
                 bounds=None):
        super().__init__(spec, nets_rng, sample_rng, lr)
        self.bounds = bounds
        self.temperature = 1.0

    def sample(self, states: Tensor, deterministic: bool = False):
        raw = self.net(states)
        d = self.net.spec.output_dim
        mean = reshape(gather_cols(raw, 0, d), (states.shape[0], d))
        log_std = reshape(gather_cols(raw, d, 2 * d), (states.shape[0], d))
        return gaussian_sample(mean, log_std, self.rng, deterministic, self.bounds)

    def act(self, obs: np.ndarray, deterministic: bool) -> np.ndarray:
        with no_grad():
            out = self.sample(Tensor(obs.reshape(1, -1)), deterministic)
        return out.action.values[0].copy()

    def loss(self, state: Tensor, critics: "CriticEnsemble") -> Tuple[Tensor, ActorOutput]:
        out = self.sample(state, deterministic=False)
        qs = critics.q_values(state, out.action)
        q_min = reduce_q_tensors(qs, critics.reduce_kind)
        loss = (out.log_prob * self.temperature - q_min).mean()
        act_dict = ActorOutput(action=out.action, log_prob=out.log_prob,
                               aux={"pre_tanh": out.pre_tanh})
        return loss, act_dict


class CategoricalActor(Actor):
    """Softmax policy over a discrete action set (ppo style)."""

    def __init__(self, spec: MLPSpec, nets_rng: Rng, sample_rng: Rng, lr: float):
        super().__init__(spec, nets_rng, sample_rng, lr)
        self.n_actions = spec.output_dim

    def log_probs(self, states: Tensor) -> Tensor:
        """Row-wise log softmax of the logits, shape (n, n_actions)."""
        logits = self.net(states)
        shift = Tensor(np.broadcast_to(
            logits.values.max(axis=1, keepdims=True), logits.shape).copy())
        shifted = logits - shift
        log_z = shifted.exp().sum(axis=1).log()
        n = logits.shape[0]
        tiled = reshape(log_z, (n, 1)) @ Tensor(np.ones((1, self.n_actions)))
        return shifted - tiled

    def sample_with_log_prob(self, obs: np.ndarray) -> Tuple[int, float]:
        with no_grad():
            lp = self.log_probs(Tensor(obs.reshape(1, -1))).values[0]
        cdf = np.cumsum(np.exp(lp))
        cdf[-1] = 1.0  # guard against rounding shortfall
        action = int(np.searchsorted(cdf, self.rng.uniform(0.0, 1.0)))
        return action, float(lp[action])

    def act(self, obs: np.ndarray, deterministic: bool) -> int:
        if deterministic:
            with no_grad():
                lp = self.log_probs(Tensor(obs.reshape(1, -1))).values[0]
            return int(np.argmax(lp))
        return self.sample_with_log_prob(obs)[0]


def gather_cols(t: Tensor, start: int, stop: int) -> Tensor:
    """Differentiable column slice t[:, start:stop]."""
    n, d = t.shape
    if not 0 <= start < stop <= d:
        raise ShapeError(f"column slice [{start}:{stop}] invalid for width {d}")
    sel = np.zeros((d, stop - start))
    sel[np.arange(start, stop), np.arange(stop - start)] = 1.0
    return t @ Tensor(sel)


class CriticEnsemble:
    """N same-architecture Q networks with frozen target copies.

    ``get_bellman_target`` is the override point for algorithm-specific
    bootstrap values; the base form is the plain Bellman backup over the
    reduced target ensemble.
    """

    def __init__(self, n_members: int, spec: MLPSpec, nets_rng: Rng, lr: float,
                 gamma: float, reduce_kind: str = "min"):
        if n_members < 1:
            raise ValueError("ensemble needs at least one member")
        if reduce_kind not in ("min", "mean"):
            raise ValueError(f"unknown reduce kind {reduce_kind!r}")
        self.members = [MLP(spec, nets_rng) for _ in range(n_members)]
        self.targets = [m.frozen_copy() for m in self.members]
        self.reduce_kind = reduce_kind
        self.gamma = gamma
        all_params: List[Tensor] = []
        for m in self.members:
            all_params.extend(m.params)
        self.optimizer = Adam(all_params, lr=lr)

    @property
    def n_members(self) -> int:
        return len(self.members)

    def member_q(self, index: int, states: Tensor, actions: Tensor) -> Tensor:
        x = concat_cols(states, actions)
        q = self.members[index](x)
        return reshape(q, (q.shape[0],))

    def q_values(self, states: Tensor, actions: Tensor) -> List[Tensor]:
        x = concat_cols(states, actions)  # shared input node for all members
        out = []
        for member in self.members:
            q = member(x)
            out.append(reshape(q, (q.shape[0],)))
        return out

    def target_reduced(self, next_states: np.ndarray, next_actions: np.ndarray) -> np.ndarray:
        """Reduced target-ensemble value at (s', a'); gradients never flow here."""
        with no_grad():
            x = concat_cols(Tensor(next_states), Tensor(next_actions))
            stack = np.stack([t(x).values.reshape(-1) for t in self.targets])
        return reduce_ensemble(stack, self.reduce_kind)

    def get_bellman_target(self, batch: Batch, ctx: Dict[str, object]) -> np.ndarray:
        target_reduced = self.target_reduced(batch.next_states, ctx["next_action"])
        return batch.rewards + self.gamma * (1.0 - batch.terminated) * target_reduced

    def update(self, batch: Batch, targets: np.ndarray) -> float:
        """One regression step of every member toward the shared targets."""
        states = Tensor(batch.states)
        actions = Tensor(batch.actions.reshape(len(batch), -1))
        y = Tensor(targets)
        total = None
        for q in self.q_values(states, actions):
            term = (q - y).square().mean()
            total = term if total is None else total + term
        loss = total * (1.0 / self.n_members)
        value = loss.item()
        self.optimizer.step(backward(loss, params=self.optimizer.params))
        return value

    def sync_targets(self, tau: float) -> None:
        for m, t in zip(self.members, self.targets):
            polyak_update(m.params, t.params, tau)

    def named(self, prefix: str = "critic") -> Dict[str, np.ndarray]:
        out: Dict[str, np.ndarray] = {}
        for i, m in enumerate(self.members):
            out.update(m.named(f"{prefix}{i}"))
        for i, t in enumerate(self.targets):
            out.update(t.named(f"{prefix}{i}_target"))
        return out


class Agent:
    """Common surface for learning and environment interaction.

    Holds the utilities every algorithm shares: the replay buffer, the
    derived random streams, and the step/update counters. Subclasses
    implement ``act`` and ``_update``.
    """

    report_keys: Tuple[str, ...] = ()

    def __init__(self, tree: ConfigTree, obs_dim: int, act_space, rngs: Dict[str, Rng]):
        self.cfg = tree.algo
        self.nets_cfg = tree.nets
        self.obs_dim = obs_dim
        self.act_space = act_space
        self.rng_nets = rngs["nets"]
        self.rng_sample = rngs["sampling"]
        self.rngs = rngs
        self.global_step = 0
        self.update_count = 0
        self.buffer = ReplayBuffer(self.cfg.replay_capacity)

    # -- environment interaction ----------------------------------------

    def _check_obs(self, obs: np.ndarray) -> np.ndarray:
        arr = np.asarray(obs, dtype=np.float64).reshape(-1)
        if arr.shape[0] != self.obs_dim:
            raise ShapeError(f"observation dim {arr.shape[0]} != expected {self.obs_dim}")
        return arr

    def act(self, obs: np.ndarray, deterministic: bool = False):
        raise NotImplementedError

    def observe(self, transition: Transition) -> None:
        self.global_step += 1
        self.buffer.push(transition)

    # -- learning --------------------------------------------------------

    @property
    def ready(self) -> bool:
        return self.global_step >= self.cfg.warmup_steps and len(self.buffer) > 0

    def learn(self) -> Optional[Dict[str, float]]:
        """One update; returns the loss report, or None when warmup is unmet."""
        if not self.ready:
            return None
        self.update_count += 1
        batch = self.buffer.sample(self.cfg.batch_size, self.rng_sample)
        return self._update(batch)

    def _update(self, batch: Batch) -> Dict[str, float]:
        raise NotImplementedError

    # -- checkpointing -----------------------------------------------------

    def named_arrays(self) -> Dict[str, np.ndarray]:
        out = self._component_arrays()
        out["counter.global_step"] = np.array([float(self.global_step)])
        out["counter.update_count"] = np.array([float(self.update_count)])
        for name, opt in self._optimizers().items():
            out[f"opt.{name}.t"] = np.array([float(opt.t)])
            for i, (m, v) in enumerate(zip(opt.m, opt.v)):
                out[f"opt.{name}.m{i}"] = m
                out[f"opt.{name}.v{i}"] = v
        return out

    def load_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        own = self.named_arrays()
        missing = set(own) - set(arrays)
        if missing:
            raise ValueError(f"checkpoint missing arrays: {sorted(missing)[:4]}...")
        for name, current in own.items():
            incoming = np.asarray(arrays[name], dtype=np.float64)
            if incoming.shape != current.shape:
                raise ValueError(
                    f"checkpoint array {name} has shape {incoming.shape}, expected {current.shape}")
        self._assign_arrays(arrays)
        self.global_step = int(arrays["counter.global_step"][0])
        self.update_count = int(arrays["counter.update_count"][0])
        for name, opt in self._optimizers().items():
            opt.t = int(arrays[f"opt.{name}.t"][0])
            for i in range(len(opt.m)):
                opt.m[i] = np.asarray(arrays[f"opt.{name}.m{i}"], dtype=np.float64).copy()
                opt.v[i] = np.asarray(arrays[f"opt.{name}.v{i}"], dtype=np.float64).copy()

    def _component_arrays(self) -> Dict[str, np.ndarray]:
        raise NotImplementedError

    def _optimizers(self) -> Dict[str, Adam]:
        raise NotImplementedError

    def _assign_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        for name, param in self._named_param_tensors().items():
            param.values = np.asarray(arrays[name], dtype=np.float64).copy()

    def _named_param_tensors(self) -> Dict[str, Tensor]:
        raise NotImplementedError


def _named_tensors_of_mlp(mlp: MLP, prefix: str) -> Dict[str, Tensor]:
    out = {}
    for i in range(0, len(mlp.params), 2):
        out[f"{prefix}.w{i // 2}"] = mlp.params[i]
        out[f"{prefix}.b{i // 2}"] = mlp.params[i + 1]
    return out


class ActorCritic(Agent):
    """Skeleton shared by the off-policy continuous-control algorithms.

    The update sequence is fixed: build the target context, regress the
    critic ensemble onto its Bellman targets, update the actor (and any
    algorithm extras), then move the target networks. Subclasses customize
    behavior only through the hook methods.
    """

    critic_cls = None  # concrete classes pick their ensemble type

    def __init__(self, tree: ConfigTree, obs_dim: int, act_space, rngs: Dict[str, Rng]):
        super().__init__(tree, obs_dim, act_space, rngs)
        self.gamma = self.cfg.gamma
        self.tau = self.cfg.tau
        self.act_dim = act_space.dim
        self.actor: Actor = self._build_actor()
        self.critic: CriticEnsemble = self._build_critic()

    def _build_actor(self) -> Actor:
        raise NotImplementedError

    def _critic_spec(self) -> MLPSpec:
        return MLPSpec(self.obs_dim + self.act_dim, list(self.nets_cfg.hidden), 1,
                       activation=self.nets_cfg.activation, head="q-value")

    def _build_critic(self) -> CriticEnsemble:
        cls = self.critic_cls or CriticEnsemble
        return cls(self.cfg.critic_ensemble, self._critic_spec(), self.rng_nets,
                   lr=self.cfg.lr_critic, gamma=self.gamma)

    def act(self, obs: np.ndarray, deterministic: bool = False):
        arr = self._check_obs(obs)
        if not deterministic and self.global_step < self.cfg.warmup_steps:
            return self.act_space.sample(self.rng_sample)  # uniform warmup exploration
        return self.actor.act(arr, deterministic)

    def _update(self, batch: Batch) -> Dict[str, float]:
        ctx = self._target_context(batch)
        targets = self.critic.get_bellman_target(batch, ctx)
        report = {"loss_critic": self.critic.update(batch, targets)}
        report.update(self._update_actor(batch))
        self._sync_targets()
        return report

    def _target_context(self, batch: Batch) -> Dict[str, object]:
        raise NotImplementedError

    def _update_actor(self, batch: Batch) -> Dict[str, float]:
        loss, _ = self.actor.loss(Tensor(batch.states), self.critic)
        value = loss.item()
        self.actor.step(loss)
        return {"loss_actor": value}

    def _sync_targets(self) -> None:
        self.critic.sync_targets(self.tau)
        if isinstance(self.actor, BoundedDeterministicActor):
            self.actor.sync_target(self.tau)

    def _component_arrays(self) -> Dict[str, np.ndarray]:
        out = self.actor.named("actor")
        out.update(self.critic.named("critic"))
        return out

    def _optimizers(self) -> Dict[str, Adam]:
        return {"actor": self.actor.optimizer, "critic": self.critic.optimizer}

    def _named_param_tensors(self) -> Dict[str, Tensor]:
        out = _named_tensors_of_mlp(self.actor.net, "actor")
        if isinstance(self.actor, BoundedDeterministicActor):
            out.update(_named_tensors_of_mlp(self.actor.target, "actor_target"))
        for i, m in enumerate(self.critic.members):
            out.update(_named_tensors_of_mlp(m, f"critic{i}"))
        for i, t in enumerate(self.critic.targets):
            out.update(_named_tensors_of_mlp(t, f"critic{i}_target"))
        return out
