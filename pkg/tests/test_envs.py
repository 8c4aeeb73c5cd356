"""Environment dynamics against hand-integrated reference oracles."""

import math

import numpy as np
import pytest

from rlbricks.envs import (
    Box,
    CartPole,
    Discrete,
    Pendulum,
    RescaleAction,
    TimeLimit,
    make,
)


class TestSpaces:
    def test_discrete_validation(self):
        with pytest.raises(ValueError):
            Discrete(1)
        space = Discrete(3)
        assert space.contains(2) and not space.contains(3) and not space.contains(-1)

    def test_box_validation(self):
        with pytest.raises(ValueError):
            Box(np.array([0.0]), np.array([0.0]))
        box = Box(np.array([-1.0, -2.0]), np.array([1.0, 2.0]))
        assert box.contains([0.0, 2.0]) and not box.contains([0.0, 2.1])
        assert box.dim == 2


class TestReset:
    def test_same_seed_same_observation(self):
        env = CartPole()
        a = env.reset(seed=7)
        b = env.reset(seed=7)
        assert np.array_equal(a, b)

    def test_cartpole_reset_range(self):
        for seed in range(50):
            obs = CartPole().reset(seed=seed)
            assert obs.shape == (4,)
            assert np.all(obs >= -0.05) and np.all(obs <= 0.05)

    def test_pendulum_reset_range(self):
        for seed in range(50):
            env = Pendulum()
            obs = env.reset(seed=seed)
            cos_t, sin_t, theta_dot = obs
            assert cos_t == pytest.approx(math.cos(env._theta))
            assert sin_t == pytest.approx(math.sin(env._theta))
            assert -math.pi <= env._theta <= math.pi
            assert -1.0 <= theta_dot <= 1.0

    def test_unseeded_resets_advance_the_stream(self):
        env = CartPole(seed=3)
        first = env.reset()
        second = env.reset()
        assert not np.array_equal(first, second)


class TestCartPoleStep:
    def _hand_step(self, state, force):
        # independent Euler integration of the published dynamics
        x, x_dot, theta, theta_dot = state
        g, mc, mp, half_l, dt = 9.8, 1.0, 0.1, 0.5, 0.02
        total = mc + mp
        temp = (force + mp * half_l * theta_dot**2 * math.sin(theta)) / total
        theta_acc = (g * math.sin(theta) - math.cos(theta) * temp) / (
            half_l * (4.0 / 3.0 - mp * math.cos(theta) ** 2 / total))
        x_acc = temp - mp * half_l * theta_acc * math.cos(theta) / total
        return np.array([x + dt * x_dot, x_dot + dt * x_acc,
                         theta + dt * theta_dot, theta_dot + dt * theta_acc])

    def test_zero_state_push_matches_hand_integration(self):
        env = CartPole()
        env.reset(seed=0)
        env._state = np.zeros(4)
        result = env.step(1)
        assert np.allclose(result.observation, self._hand_step(np.zeros(4), 10.0),
                           atol=1e-15)
        assert result.reward == 1.0 and not result.terminated

    def test_random_states_match_hand_integration(self):
        rng = np.random.default_rng(5)
        env = CartPole()
        for _ in range(100):
            state = rng.uniform(-0.2, 0.2, 4)
            env.reset(seed=0)
            env._state = state.copy()
            action = int(rng.integers(2))
            result = env.step(action)
            expected = self._hand_step(state, 10.0 if action == 1 else -10.0)
            assert np.allclose(result.observation, expected, atol=1e-13)

    def test_termination_thresholds(self):
        env = CartPole()
        env.reset(seed=0)
        env._state = np.array([0.0, 0.0, 12.5 * 2 * math.pi / 360.0, 0.0])
        assert env.step(0).terminated
        env.reset(seed=0)
        env._state = np.array([2.45, 10.0, 0.0, 0.0])
        assert env.step(1).terminated

    def test_step_after_terminated_rejected(self):
        env = CartPole()
        env.reset(seed=0)
        env._state = np.array([2.45, 10.0, 0.0, 0.0])
        env.step(1)
        with pytest.raises(RuntimeError):
            env.step(1)

    def test_action_outside_space_rejected(self):
        env = CartPole()
        env.reset(seed=0)
        with pytest.raises(ValueError):
            env.step(2)


class TestPendulumStep:
    def test_equilibrium_is_fixed_point(self):
        env = Pendulum()
        env.reset(seed=0)
        env._theta, env._theta_dot = 0.0, 0.0
        result = env.step(np.array([0.0]))
        assert result.reward == 0.0
        assert np.array_equal(result.observation, np.array([1.0, 0.0, 0.0]))

    def test_worst_case_cost(self):
        env = Pendulum()
        env.reset(seed=0)
        env._theta, env._theta_dot = math.pi, 8.0
        result = env.step(np.array([2.0]))
        assert result.reward == pytest.approx(-(math.pi**2 + 6.4 + 0.004), abs=1e-12)

    def test_semi_implicit_euler_order(self):
        # velocity updates first; the position then uses the new velocity
        env = Pendulum()
        env.reset(seed=0)
        theta, theta_dot, u = 0.7, -0.3, 1.5
        env._theta, env._theta_dot = theta, theta_dot
        env.step(np.array([u]))
        new_dot = theta_dot + (15.0 * math.sin(theta) + 3.0 * u) * 0.05
        assert env._theta_dot == pytest.approx(new_dot, abs=1e-15)
        assert env._theta == pytest.approx(theta + new_dot * 0.05, abs=1e-15)

    def test_speed_clipped(self):
        env = Pendulum()
        env.reset(seed=0)
        env._theta, env._theta_dot = math.pi / 2, 7.9
        env.step(np.array([2.0]))
        assert env._theta_dot == 8.0

    def test_torque_outside_space_rejected(self):
        env = Pendulum()
        env.reset(seed=0)
        with pytest.raises(ValueError):
            env.step(np.array([2.5]))

    def test_energy_matches_symplectic_reference(self):
        # zero-torque steps agree with an independent symplectic-Euler
        # reference, so the energy drift equals the reference's own drift
        def energy(theta, theta_dot):
            return theta_dot**2 / 6.0 + 5.0 * math.cos(theta)

        rng = np.random.default_rng(11)
        for _ in range(200):
            theta = float(rng.uniform(-math.pi, math.pi))
            theta_dot = float(rng.uniform(-1.0, 1.0))
            env = Pendulum()
            env.reset(seed=0)
            env._theta, env._theta_dot = theta, theta_dot
            env.step(np.array([0.0]))
            ref_dot = np.clip(theta_dot + 15.0 * math.sin(theta) * 0.05, -8.0, 8.0)
            ref_theta = theta + ref_dot * 0.05
            drift = abs(energy(env._theta, env._theta_dot) - energy(ref_theta, ref_dot))
            assert drift < 0.05

    def test_dynamics_are_pure(self):
        env = Pendulum()
        env.reset(seed=0)
        env._theta, env._theta_dot = 1.0, 0.5
        first = env.step(np.array([1.0])).observation
        env._theta, env._theta_dot = 1.0, 0.5
        second = env.step(np.array([1.0])).observation
        assert np.array_equal(first, second)


class TestWrappers:
    def test_time_limit_truncates(self):
        env = TimeLimit(Pendulum(), 200)
        env.reset(seed=0)
        for i in range(1, 201):
            result = env.step(np.array([0.0]))
        assert result.truncated and not result.terminated

    def test_termination_takes_its_own_flag(self):
        env = TimeLimit(CartPole(), 500)
        env.reset(seed=0)
        env.env._state = np.array([2.45, 5.0, 0.0, 0.0])
        result = env.step(1)
        assert result.terminated and not result.truncated

    def test_reset_clears_counter(self):
        env = TimeLimit(Pendulum(), 3)
        env.reset(seed=0)
        for _ in range(3):
            env.step(np.array([0.0]))
        env.reset(seed=1)
        assert not env.step(np.array([0.0])).truncated

    def test_rescale_endpoints(self):
        inner = Pendulum()
        env = RescaleAction(inner)
        env.reset(seed=0)
        inner._theta, inner._theta_dot = 0.0, 0.0
        env.step(np.array([-1.0]))  # maps to torque -2: must be accepted
        env.reset(seed=0)
        inner._theta, inner._theta_dot = math.pi, 8.0
        result = env.step(np.array([1.0]))  # maps to torque +2
        assert result.reward == pytest.approx(-(math.pi**2 + 6.4 + 0.004), abs=1e-12)

    def test_rescale_midpoint(self):
        inner = Pendulum()
        env = RescaleAction(inner)
        env.reset(seed=0)
        inner._theta, inner._theta_dot = 0.5, 0.0
        env.step(np.array([0.0]))  # midpoint of the box: zero torque
        expected_dot = 15.0 * math.sin(0.5) * 0.05
        assert inner._theta_dot == pytest.approx(expected_dot, abs=1e-15)

    def test_rescale_requires_box(self):
        with pytest.raises(ValueError):
            RescaleAction(CartPole())

    def test_make_registry(self):
        cp = make("cartpole")
        assert isinstance(cp.action_space, Discrete) and cp.max_steps == 500
        pend = make("pendulum")
        assert isinstance(pend.action_space, Box)
        assert np.array_equal(pend.action_space.low, [-1.0])
        with pytest.raises(ValueError):
            make("mountaincar")
