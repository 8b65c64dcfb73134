"""Environment dynamics, rewards, determinism, and rendering."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prefrl.data import Segment
from prefrl.envs import PendulumSwingUp, PointMassReach, env_names, make, render_trajectory
from prefrl.errors import ContractError, DimensionError


class TestRegistry:
    def test_names(self):
        assert env_names() == ["pendulum_swing_up", "point_mass_reach"]

    def test_unknown_env(self):
        with pytest.raises(ContractError):
            make("cartpole")


class TestPointMass:
    def test_reward_one_at_origin(self):
        env = make("point_mass_reach")
        env.reset(np.random.default_rng(0))
        env._state = np.zeros(4)
        _, reward, _ = env.step(np.zeros(2))
        assert reward == 1.0

    def test_reward_bounds_and_episode_length(self):
        env = make("point_mass_reach")
        rng = np.random.default_rng(1)
        env.reset(rng)
        for t in range(env.spec.episode_len):
            _, r, done = env.step(rng.uniform(-1, 1, 2))
            assert 0.0 < r <= 1.0
            assert done == (t == env.spec.episode_len - 1)

    def test_matches_reference_integrator(self):
        env = make("point_mass_reach")
        rng = np.random.default_rng(2)
        state = env.reset(rng)
        actions = rng.uniform(-1, 1, size=(50, 2))
        # hand integrator: v' = 0.95 v + 0.05 a; p' = clip(p + 0.05 v')
        p = state[:2].copy()
        v = state[2:].copy()
        for a in actions:
            next_state, reward, _ = env.step(a)
            v = 0.95 * v + 0.05 * np.clip(a, -1, 1)
            p = np.clip(p + 0.05 * v, -2.0, 2.0)
            np.testing.assert_allclose(next_state, np.concatenate([p, v]), atol=1e-10)
            assert abs(reward - np.exp(-(p[0] ** 2 + p[1] ** 2))) < 1e-10

    def test_positions_clipped(self):
        env = make("point_mass_reach")
        env.reset(np.random.default_rng(0))
        env._state = np.array([1.99, -1.99, 1.0, -1.0])
        for _ in range(100):
            s, _, _ = env.step(np.array([1.0, -1.0]))
        assert abs(s[0]) <= 2.0 and abs(s[1]) <= 2.0

    def test_action_clipping_absorbs_invalid(self):
        env = make("point_mass_reach")
        env.reset(np.random.default_rng(0))
        env._state = np.zeros(4)
        s_big, _, _ = env.step(np.array([10.0, 10.0]))
        env._state = np.zeros(4)
        s_unit, _, _ = env.step(np.array([1.0, 1.0]))
        np.testing.assert_array_equal(s_big, s_unit)


class TestPendulum:
    def test_hanging_rest_scores_zero(self):
        env = make("pendulum_swing_up")
        env.reset(np.random.default_rng(0))
        env._theta, env._thdot = np.pi, 0.0
        _, reward, _ = env.step(np.array([0.0]))
        assert abs(reward) < 1e-12

    def test_upright_rest_scores_near_one(self):
        env = make("pendulum_swing_up")
        env.reset(np.random.default_rng(0))
        env._theta, env._thdot = 0.0, 0.0
        _, reward, _ = env.step(np.array([0.0]))
        assert reward > 0.99

    def test_matches_reference_integrator(self):
        env = make("pendulum_swing_up")
        rng = np.random.default_rng(3)
        env.reset(rng)
        theta, thdot = env._theta, env._thdot
        for _ in range(100):
            a = float(rng.uniform(-1, 1))
            obs, reward, _ = env.step(np.array([a]))
            acc = 15.0 * np.sin(theta) + 3.0 * a
            thdot = np.clip(thdot + 0.05 * acc, -8.0, 8.0)
            theta = (theta + 0.05 * thdot + np.pi) % (2 * np.pi) - np.pi
            np.testing.assert_allclose(obs, [np.cos(theta), np.sin(theta), thdot], atol=1e-10)
            expected_r = (1 + np.cos(theta)) / 2 - 0.01 * thdot**2 - 0.001 * a * a
            assert abs(reward - expected_r) < 1e-10

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_unit_circle_invariant(self, seed):
        env = make("pendulum_swing_up")
        rng = np.random.default_rng(seed)
        s = env.reset(rng)
        for _ in range(20):
            s, _, _ = env.step(rng.uniform(-1, 1, 1))
            assert abs(s[0] ** 2 + s[1] ** 2 - 1.0) < 1e-9

    def test_episode_length(self):
        env = make("pendulum_swing_up")
        rng = np.random.default_rng(0)
        env.reset(rng)
        dones = [env.step(np.zeros(1))[2] for _ in range(200)]
        assert not any(dones[:-1]) and dones[-1]


class TestDeterminism:
    @pytest.mark.parametrize("name", ["point_mass_reach", "pendulum_swing_up"])
    def test_same_seed_same_trajectory(self, name):
        def rollout():
            env = make(name)
            rng = np.random.default_rng(42)
            s = env.reset(rng)
            out = [s]
            for _ in range(30):
                s, r, _ = env.step(rng.uniform(-1, 1, env.spec.action_dim))
                out.append(np.append(s, r))
            return np.concatenate(out)

        np.testing.assert_array_equal(rollout(), rollout())


class TestRendering:
    def _segment(self, env, length=15):
        rng = np.random.default_rng(5)
        s = env.reset(rng)
        states, actions = [], []
        for _ in range(length):
            a = rng.uniform(-1, 1, env.spec.action_dim)
            states.append(s)
            actions.append(a)
            s, _, _ = env.step(a)
        return Segment(np.array(states), np.array(actions), 0, 0)

    def test_length_matches_segment(self):
        env = make("point_mass_reach")
        seg = self._segment(env)
        coords = render_trajectory(env, seg)
        assert len(coords) == len(seg)
        assert all(len(c) == 2 for c in coords)

    def test_pendulum_bob_on_unit_circle(self):
        env = make("pendulum_swing_up")
        seg = self._segment(env)
        for x, y in render_trajectory(env, seg):
            assert abs(x * x + y * y - 1.0) < 1e-9

    def test_json_round_trip(self):
        env = make("point_mass_reach")
        seg = self._segment(env)
        coords = render_trajectory(env, seg)
        back = json.loads(json.dumps(coords))
        np.testing.assert_allclose(back, coords, atol=1e-9)

    def test_env_mismatch_rejected(self):
        pm = make("point_mass_reach")
        pend = make("pendulum_swing_up")
        seg = self._segment(pm)
        with pytest.raises(DimensionError):
            render_trajectory(pend, seg)
