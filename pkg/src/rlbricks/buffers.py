"""Experience storage: ring replay for off-policy, rollout storage for PPO."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from .rng import Rng


@dataclass
class Transition:
    state: np.ndarray
    action: Union[np.ndarray, int]
    reward: float
    next_state: np.ndarray
    terminated: bool
    truncated: bool


@dataclass
class Batch:
    """Columnar view of sampled transitions."""

    states: np.ndarray       # (n, obs_dim)
    actions: np.ndarray      # (n, act_dim) float or (n,) int
    rewards: np.ndarray      # (n,)
    next_states: np.ndarray  # (n, obs_dim)
    terminated: np.ndarray   # (n,) float 0/1
    truncated: np.ndarray    # (n,) float 0/1

    def __len__(self) -> int:
        return self.states.shape[0]


class ReplayBuffer:
    """Fixed-capacity ring buffer with uniform with-replacement sampling."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items: List[Transition] = []
        self._write = 0
        self._obs_dim: Optional[int] = None

    def __len__(self) -> int:
        return len(self._items)

    def push(self, t: Transition) -> None:
        state = np.asarray(t.state, dtype=np.float64).reshape(-1)
        if self._obs_dim is None:
            self._obs_dim = state.shape[0]
        elif state.shape[0] != self._obs_dim:
            raise ValueError(
                f"observation dim {state.shape[0]} != first stored dim {self._obs_dim}"
            )
        if len(self._items) < self.capacity:
            self._items.append(t)
        else:
            self._items[self._write] = t  # overwrite the oldest entry
        self._write = (self._write + 1) % self.capacity

    def contents(self) -> List[Transition]:
        """Stored transitions oldest first."""
        if len(self._items) < self.capacity:
            return list(self._items)
        return self._items[self._write:] + self._items[:self._write]

    def sample(self, batch_size: int, rng: Rng) -> Batch:
        if not self._items:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(len(self._items), size=batch_size)
        picked = [self._items[i] for i in idx]
        discrete = np.isscalar(picked[0].action) or np.asarray(picked[0].action).ndim == 0
        if discrete:
            actions = np.array([int(t.action) for t in picked], dtype=np.int64)
        else:
            actions = np.stack([np.asarray(t.action, dtype=np.float64).reshape(-1) for t in picked])
        return Batch(
            states=np.stack([np.asarray(t.state, dtype=np.float64).reshape(-1) for t in picked]),
            actions=actions,
            rewards=np.array([t.reward for t in picked], dtype=np.float64),
            next_states=np.stack([np.asarray(t.next_state, dtype=np.float64).reshape(-1) for t in picked]),
            terminated=np.array([float(t.terminated) for t in picked]),
            truncated=np.array([float(t.truncated) for t in picked]),
        )


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    terminated: np.ndarray,
    truncated: np.ndarray,
    bootstrap_value: float,
    gamma: float,
    lam: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimation over one collection segment.

    delta_t = r_t + gamma * (1 - terminated_t) * V_{t+1} - V_t, with the value
    past the segment end replaced by ``bootstrap_value`` (relevant when the
    segment was cut mid-episode). The advantage recursion
    A_t = delta_t + gamma * lam * (1 - terminated_t) * A_{t+1} masks on true
    terminals only; time-limit truncation never suppresses bootstrapping.
    Returns (advantages, returns) where returns = advantages + values.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    terminated = np.asarray(terminated, dtype=np.float64)
    truncated = np.asarray(truncated, dtype=np.float64)
    n = rewards.shape[0]
    if not (values.shape[0] == terminated.shape[0] == truncated.shape[0] == n):
        raise ValueError("gae inputs must share one length")
    if not (0.0 <= gamma <= 1.0 and 0.0 <= lam <= 1.0):
        raise ValueError("gamma and lam must lie in [0, 1]")

    advantages = np.zeros(n)
    next_adv = 0.0
    next_value = float(bootstrap_value)
    for t in range(n - 1, -1, -1):
        live = 1.0 - terminated[t]
        delta = rewards[t] + gamma * live * next_value - values[t]
        next_adv = delta + gamma * lam * live * next_adv
        advantages[t] = next_adv
        next_value = values[t]
    return advantages, advantages + values


class RolloutBuffer:
    """Contiguous storage for one on-policy collection phase."""

    def __init__(self, size: int):
        if size < 1:
            raise ValueError("rollout size must be >= 1")
        self.size = size
        self.states: List[np.ndarray] = []
        self.actions: List[Union[np.ndarray, int]] = []
        self.rewards: List[float] = []
        self.values: List[float] = []
        self.log_probs: List[float] = []
        self.terminated: List[bool] = []
        self.truncated: List[bool] = []
        self.last_next_state: Optional[np.ndarray] = None
        self.advantages: Optional[np.ndarray] = None
        self.returns: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.states)

    @property
    def full(self) -> bool:
        return len(self.states) >= self.size

    @property
    def finalized(self) -> bool:
        return self.advantages is not None

    def add(self, t: Transition, value: float, log_prob: float) -> None:
        if self.full:
            raise ValueError("rollout is already full")
        self.states.append(np.asarray(t.state, dtype=np.float64).reshape(-1))
        self.actions.append(t.action)
        self.rewards.append(float(t.reward))
        self.values.append(float(value))
        self.log_probs.append(float(log_prob))
        self.terminated.append(bool(t.terminated))
        self.truncated.append(bool(t.truncated))
        self.last_next_state = np.asarray(t.next_state, dtype=np.float64).reshape(-1)

    def finalize(self, bootstrap_value: float, gamma: float, lam: float) -> None:
        self.advantages, self.returns = compute_gae(
            np.array(self.rewards),
            np.array(self.values),
            np.array([float(x) for x in self.terminated]),
            np.array([float(x) for x in self.truncated]),
            bootstrap_value,
            gamma,
            lam,
        )

    def reset(self) -> None:
        self.__init__(self.size)
