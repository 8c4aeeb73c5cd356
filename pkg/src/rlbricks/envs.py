"""Native control environments and wrappers.

The interaction contract mirrors the Gymnasium API: ``reset(seed)`` returns
an observation, ``step(action)`` returns observation, reward, and separate
terminated/truncated flags. Physics constants and thresholds follow the
published classic-control reference specifications so results can be
cross-checked externally. Dynamics are pure functions of (state, action);
all reset randomness comes from the environment's own stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .rng import Rng


@dataclass(frozen=True)
class Discrete:
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"discrete space needs n >= 2, got {self.n}")

    @property
    def dim(self) -> int:
        return 1

    def contains(self, action) -> bool:
        try:
            a = int(action)
        except (TypeError, ValueError):
            return False
        return 0 <= a < self.n and float(action) == a

    def sample(self, rng: Rng) -> int:
        return int(rng.integers(self.n))


@dataclass(frozen=True)
class Box:
    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "low", np.asarray(self.low, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "high", np.asarray(self.high, dtype=np.float64).reshape(-1))
        if self.low.shape != self.high.shape or not np.all(self.low < self.high):
            raise ValueError("box bounds need low < high componentwise")

    @property
    def dim(self) -> int:
        return self.low.shape[0]

    def contains(self, action) -> bool:
        a = np.asarray(action, dtype=np.float64).reshape(-1)
        return a.shape == self.low.shape and bool(
            np.all(a >= self.low) and np.all(a <= self.high)
        )

    def sample(self, rng: Rng) -> np.ndarray:
        return rng.uniform(self.low, self.high, (self.dim,))


Space = Union[Discrete, Box]


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    terminated: bool  # true MDP terminal: suppresses bootstrapping
    truncated: bool   # time-limit cutoff: bootstrapping continues


class Env:
    """Base environment; subclasses fill the spaces and the dynamics."""

    observation_space: Box
    action_space: Space

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        raise NotImplementedError

    def step(self, action) -> StepResult:
        raise NotImplementedError


class CartPole(Env):
    """Pole balancing on a force-controlled cart, explicit Euler at dt=0.02.

    Observation (x, x_dot, theta, theta_dot); actions 0/1 push with -10/+10 N.
    Terminates when |theta| > 12 degrees or |x| > 2.4; reward 1 per step.
    """

    GRAVITY = 9.8
    CART_MASS = 1.0
    POLE_MASS = 0.1
    HALF_POLE_LENGTH = 0.5
    FORCE_MAG = 10.0
    DT = 0.02
    THETA_LIMIT = 12.0 * 2.0 * math.pi / 360.0
    X_LIMIT = 2.4

    def __init__(self, seed: Optional[int] = None):
        # velocity components are unbounded; large sentinels keep Box finite
        high = np.array([2.0 * self.X_LIMIT, 1e10, 2.0 * self.THETA_LIMIT, 1e10])
        self.observation_space = Box(-high, high)
        self.action_space = Discrete(2)
        self._rng = Rng(seed if seed is not None else 0)
        self._state: Optional[np.ndarray] = None
        self._terminated = True

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        if seed is not None:
            self._rng = Rng(seed)
        self._state = self._rng.uniform(-0.05, 0.05, (4,))
        self._terminated = False
        return self._state.copy()

    def step(self, action) -> StepResult:
        if self._state is None or self._terminated:
            raise RuntimeError("step called on a terminated or unreset environment")
        if not self.action_space.contains(action):
            raise ValueError(f"action {action!r} outside Discrete(2)")
        force = self.FORCE_MAG if int(action) == 1 else -self.FORCE_MAG
        x, x_dot, theta, theta_dot = self._state
        cos_t, sin_t = math.cos(theta), math.sin(theta)
        total_mass = self.CART_MASS + self.POLE_MASS
        pml = self.POLE_MASS * self.HALF_POLE_LENGTH

        temp = (force + pml * theta_dot**2 * sin_t) / total_mass
        theta_acc = (self.GRAVITY * sin_t - cos_t * temp) / (
            self.HALF_POLE_LENGTH * (4.0 / 3.0 - self.POLE_MASS * cos_t**2 / total_mass)
        )
        x_acc = temp - pml * theta_acc * cos_t / total_mass

        x = x + self.DT * x_dot
        x_dot = x_dot + self.DT * x_acc
        theta = theta + self.DT * theta_dot
        theta_dot = theta_dot + self.DT * theta_acc

        self._state = np.array([x, x_dot, theta, theta_dot])
        self._terminated = bool(abs(x) > self.X_LIMIT or abs(theta) > self.THETA_LIMIT)
        return StepResult(self._state.copy(), 1.0, self._terminated, False)


class Pendulum(Env):
    """Torque-controlled rigid pendulum swing-up, semi-implicit Euler at dt=0.05.

    Observation (cos theta, sin theta, theta_dot); torque in [-2, 2].
    Reward is -(wrapped_theta^2 + 0.1 theta_dot^2 + 0.001 torque^2) evaluated
    at the pre-step state; the episode never terminates on its own.
    """

    GRAVITY = 10.0
    MASS = 1.0
    LENGTH = 1.0
    DT = 0.05
    MAX_TORQUE = 2.0
    MAX_SPEED = 8.0

    def __init__(self, seed: Optional[int] = None):
        self.observation_space = Box(np.array([-1.0, -1.0, -self.MAX_SPEED]),
                                     np.array([1.0, 1.0, self.MAX_SPEED]))
        self.action_space = Box(np.array([-self.MAX_TORQUE]), np.array([self.MAX_TORQUE]))
        self._rng = Rng(seed if seed is not None else 0)
        self._theta = 0.0
        self._theta_dot = 0.0
        self._ready = False

    def _obs(self) -> np.ndarray:
        return np.array([math.cos(self._theta), math.sin(self._theta), self._theta_dot])

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        if seed is not None:
            self._rng = Rng(seed)
        self._theta = float(self._rng.uniform(-math.pi, math.pi))
        self._theta_dot = float(self._rng.uniform(-1.0, 1.0))
        self._ready = True
        return self._obs()

    @staticmethod
    def wrap_angle(theta: float) -> float:
        return ((theta + math.pi) % (2.0 * math.pi)) - math.pi

    def step(self, action) -> StepResult:
        if not self._ready:
            raise RuntimeError("step called before reset")
        if not self.action_space.contains(action):
            raise ValueError(f"action {action!r} outside torque box [-2, 2]")
        u = float(np.asarray(action, dtype=np.float64).reshape(-1)[0])

        wrapped = self.wrap_angle(self._theta)
        reward = -(wrapped**2 + 0.1 * self._theta_dot**2 + 0.001 * u**2)

        # velocity first (semi-implicit), matching the reference integrator
        acc = (3.0 * self.GRAVITY / (2.0 * self.LENGTH)) * math.sin(self._theta) \
            + (3.0 / (self.MASS * self.LENGTH**2)) * u
        self._theta_dot = float(np.clip(self._theta_dot + acc * self.DT,
                                        -self.MAX_SPEED, self.MAX_SPEED))
        self._theta = self._theta + self._theta_dot * self.DT
        return StepResult(self._obs(), reward, False, False)


class TimeLimit(Env):
    """Sets truncated (never terminated) once max_steps steps have elapsed."""

    def __init__(self, env: Env, max_steps: int):
        if max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        self.env = env
        self.max_steps = max_steps
        self._elapsed = 0
        self.observation_space = env.observation_space
        self.action_space = env.action_space

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        self._elapsed = 0
        return self.env.reset(seed)

    def step(self, action) -> StepResult:
        result = self.env.step(action)
        self._elapsed += 1
        if self._elapsed >= self.max_steps:
            result.truncated = True
        return result


class RescaleAction(Env):
    """Maps agent actions in [-1, 1]^d affinely onto the wrapped box space."""

    def __init__(self, env: Env):
        if not isinstance(env.action_space, Box):
            raise ValueError("action rescaling needs a box action space")
        self.env = env
        self.observation_space = env.observation_space
        d = env.action_space.dim
        self.action_space = Box(-np.ones(d), np.ones(d))
        self._low = env.action_space.low
        self._half_span = (env.action_space.high - env.action_space.low) / 2.0

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        return self.env.reset(seed)

    def step(self, action) -> StepResult:
        a = np.asarray(action, dtype=np.float64).reshape(-1)
        if not self.action_space.contains(a):
            raise ValueError(f"action {a!r} outside the unit box")
        return self.env.step(self._low + (a + 1.0) * self._half_span)


ENV_IDS = ("cartpole", "pendulum")

# Reference episode lengths for the bundled tasks.
TIME_LIMITS = {"cartpole": 500, "pendulum": 200}


def make(env_id: str, seed: Optional[int] = None) -> Env:
    """Build a ready-to-train environment: time-limited, actions normalized."""
    if env_id == "cartpole":
        return TimeLimit(CartPole(seed), TIME_LIMITS["cartpole"])
    if env_id == "pendulum":
        return TimeLimit(RescaleAction(Pendulum(seed)), TIME_LIMITS["pendulum"])
    raise ValueError(f"unknown environment id {env_id!r}")
