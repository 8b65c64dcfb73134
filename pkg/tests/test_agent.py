"""SAC agent, entropy estimator, pre-training, and target tracking."""

import math

import numpy as np
import pytest

from prefrl import ndmath as nd
from prefrl.agent import AgentConfig, SacAgent, intrinsic_entropy_reward, pretrain
from prefrl.data import AgentBatch, ReplayBuffer
from prefrl.envs import make
from prefrl.errors import ContractError


def small_agent(seed=0, **cfg_kwargs):
    defaults = dict(hidden=16, batch_size=16, init_random_steps=8)
    defaults.update(cfg_kwargs)
    return SacAgent(4, 2, AgentConfig(**defaults), np.random.default_rng(seed))


def random_batch(rng, n=16, state_dim=4, action_dim=2):
    return AgentBatch(
        states=rng.standard_normal((n, state_dim)),
        actions=np.tanh(rng.standard_normal((n, action_dim))),
        next_states=rng.standard_normal((n, state_dim)),
        learned_rewards=rng.uniform(-1, 1, n),
        dones=np.zeros(n),
    )


class TestEntropyReward:
    def test_duplicate_states_clamped(self):
        states = np.zeros((2, 3))
        r = intrinsic_entropy_reward(states, k=1)
        np.testing.assert_allclose(r, math.log(1e-6), rtol=1e-12)

    def test_grid_interior_log_spacing(self):
        d = 0.37
        states = (np.arange(10) * d).reshape(-1, 1)
        r = intrinsic_entropy_reward(states, k=1)
        np.testing.assert_allclose(r[1:-1], math.log(d), rtol=1e-9)

    def test_matches_brute_force_oracle_exactly(self):
        rng = np.random.default_rng(7)
        states = rng.standard_normal((100, 3))
        k = 5
        r = intrinsic_entropy_reward(states, k)
        for i in range(100):
            dists = []
            for j in range(100):
                acc = 0.0
                for c in range(3):
                    diff = states[i, c] - states[j, c]
                    acc += diff * diff
                dists.append(acc)
            dists.sort()
            expected = math.log(max(math.sqrt(dists[k]), 1e-6))
            assert r[i] == expected

    def test_sparser_regions_score_higher(self):
        tight = np.random.default_rng(0).normal(0, 0.01, (50, 2))
        loose = np.random.default_rng(0).normal(0, 10.0, (50, 2))
        assert intrinsic_entropy_reward(loose, 3).mean() > intrinsic_entropy_reward(tight, 3).mean()

    def test_batch_must_exceed_k(self):
        with pytest.raises(ContractError):
            intrinsic_entropy_reward(np.zeros((5, 2)), k=5)


class TestActing:
    def test_actions_within_bounds(self):
        agent = small_agent()
        rng = np.random.default_rng(1)
        for _ in range(500):
            a = agent.act(rng.standard_normal(4) * 10)
            assert np.all(np.abs(a) <= 1.0)

    def test_deterministic_act_repeatable(self):
        agent = small_agent()
        s = np.array([0.1, -0.2, 0.3, 0.4])
        a1 = agent.act(s, deterministic=True)
        a2 = agent.act(s, deterministic=True)
        np.testing.assert_array_equal(a1, a2)

    def test_collapsed_logstd_matches_deterministic(self):
        agent = small_agent()
        agent.actor_pset["logstd.W"].data[...] = 0.0
        agent.actor_pset["logstd.b"].data[...] = -10.0
        s = np.array([0.5, 0.5, -0.5, -0.5])
        det = agent.act(s, deterministic=True)
        for _ in range(20):
            assert np.max(np.abs(agent.act(s) - det)) < 1e-3


class TestUpdate:
    def test_zero_gamma_targets_equal_rewards(self):
        agent = small_agent(gamma=0.0)
        rng = np.random.default_rng(3)
        batch = random_batch(rng)
        targets = agent.critic_targets(batch, rng)
        np.testing.assert_array_equal(targets, batch.learned_rewards)

    def test_terminal_mask(self):
        agent = small_agent(gamma=0.9)
        rng = np.random.default_rng(3)
        batch = random_batch(rng)._replace(dones=np.ones(16))
        targets = agent.critic_targets(batch, rng)
        np.testing.assert_array_equal(targets, batch.learned_rewards)

    def test_critic_gradient_matches_finite_differences(self):
        agent = small_agent()
        rng = np.random.default_rng(4)
        batch = random_batch(rng, n=8)
        targets = agent.critic_targets(batch, rng)  # frozen stochastic terms

        def value():
            return agent.critic_loss_graph(batch.states, batch.actions, targets).item()

        with nd.Tape() as tape:
            loss = agent.critic_loss_graph(batch.states, batch.actions, targets)
        grads = tape.gradients(loss)
        h = 1e-5
        checked = 0
        for name, p in agent.critic_pset.items():
            flat = p.data.ravel()
            gf = grads[p].ravel()
            idx = np.random.default_rng(0).choice(flat.size, size=min(10, flat.size), replace=False)
            for i in idx:
                orig = flat[i]
                flat[i] = orig + h
                fp = value()
                flat[i] = orig - h
                fm = value()
                flat[i] = orig
                num = (fp - fm) / (2 * h)
                assert abs(gf[i] - num) < 1e-3 * max(abs(num), 1e-2)
                checked += 1
        assert checked >= 40

    def test_actor_gradient_matches_finite_differences(self):
        agent = small_agent()
        rng = np.random.default_rng(5)
        batch = random_batch(rng, n=6)
        eps = rng.standard_normal((6, 2))

        def value():
            loss, _ = agent.actor_loss_graph(batch.states, eps)
            return loss.item()

        with nd.Tape() as tape:
            loss, _ = agent.actor_loss_graph(batch.states, eps)
        grads = tape.gradients(loss)
        h = 1e-5
        for name, p in agent.actor_pset.items():
            flat = p.data.ravel()
            g = grads.get(p)
            if g is None:
                continue
            gf = g.ravel()
            idx = np.random.default_rng(1).choice(flat.size, size=min(8, flat.size), replace=False)
            for i in idx:
                orig = flat[i]
                flat[i] = orig + h
                fp = value()
                flat[i] = orig - h
                fm = value()
                flat[i] = orig
                num = (fp - fm) / (2 * h)
                assert abs(gf[i] - num) < 1e-3 * max(abs(num), 1e-2)

    def test_toy_mdp_converges_to_geometric_series(self):
        # One state, one action, constant reward, temperature 0: the critic
        # should approach Q = r / (1 - gamma).
        gamma, r = 0.9, 0.4
        agent = small_agent(gamma=gamma, temperature=0.0, lr=3e-3, tau_ema=0.05,
                            target_update_freq=1)
        s0 = np.array([0.3, -0.1, 0.2, 0.0])
        a0 = np.array([0.25, -0.5])
        agent.sample_actions_rows = lambda states, rng: (
            np.tile(a0, (states.shape[0], 1)),
            np.zeros(states.shape[0]),
        )
        batch = AgentBatch(
            states=np.tile(s0, (16, 1)),
            actions=np.tile(a0, (16, 1)),
            next_states=np.tile(s0, (16, 1)),
            learned_rewards=np.full(16, r),
            dones=np.zeros(16),
        )
        for _ in range(3000):
            agent.update(batch)
        q = agent._q_rows(agent._q1, s0[None, :], a0[None, :])[0]
        assert abs(q - r / (1 - gamma)) < 1e-2

    def test_update_returns_finite_losses(self):
        agent = small_agent()
        rng = np.random.default_rng(6)
        out = agent.update(random_batch(rng))
        assert np.isfinite(out["critic_loss"]) and np.isfinite(out["actor_loss"])


class TestTargetTracking:
    def test_ema_geometric_contraction(self):
        agent = small_agent()
        tau = agent.cfg.tau_ema
        online = agent.critic_pset
        target = agent.target_pset
        # push the target away, then track a frozen online set
        for name, p in target.items():
            p.data += 1.0
        gaps0 = {n: np.abs(p.data - online[n].data).max() for n, p in target.items()}
        n_steps = 50
        for _ in range(n_steps):
            nd.ema_update(target, online, tau)
        for name, p in target.items():
            expected = gaps0[name] * (1 - tau) ** n_steps
            assert abs(np.abs(p.data - online[name].data).max() - expected) < 1e-9

    def test_targets_update_only_at_frequency(self):
        agent = small_agent(target_update_freq=2)
        rng = np.random.default_rng(7)
        before = agent.target_pset["q1.0.W"].data.copy()
        agent.update(random_batch(rng))  # update 1: no EMA yet
        np.testing.assert_array_equal(before, agent.target_pset["q1.0.W"].data)
        agent.update(random_batch(rng))  # update 2: EMA fires
        assert not np.array_equal(before, agent.target_pset["q1.0.W"].data)


class TestPretrain:
    def test_zero_steps_is_noop(self):
        env = make("point_mass_reach")
        agent = small_agent()
        buf = ReplayBuffer(4, 2, 1000)
        pretrain(agent, env, buf, 0, np.random.default_rng(0))
        assert buf.size == 0
        assert agent.n_updates == 0

    def test_transitions_state_placeholder_reward(self):
        env = make("point_mass_reach")
        agent = small_agent()
        buf = ReplayBuffer(4, 2, 1000)
        pretrain(agent, env, buf, 120, np.random.default_rng(0))
        assert buf.size == 120
        assert agent.n_updates == 120 - agent.cfg.batch_size + 1
        batch = buf.sample_batch(32, np.random.default_rng(1))
        np.testing.assert_array_equal(batch.learned_rewards, np.zeros(32))

    def test_episode_bookkeeping_spans_resets(self):
        env = make("point_mass_reach")
        agent = small_agent()
        buf = ReplayBuffer(4, 2, 1000)
        pretrain(agent, env, buf, 250, np.random.default_rng(0))
        assert buf.n_episodes == 3  # 100 + 100 + 50


class TestCheckpoint:
    def test_round_trip_preserves_policy(self, tmp_path):
        agent = small_agent(seed=9)
        rng = np.random.default_rng(10)
        for _ in range(5):
            agent.update(random_batch(rng))
        path = tmp_path / "agent.npz"
        agent.save(path, extra_meta={"env": "point_mass_reach"})
        loaded, meta = SacAgent.load(path)
        assert meta["env"] == "point_mass_reach"
        s = rng.standard_normal(4)
        np.testing.assert_array_equal(
            agent.act(s, deterministic=True), loaded.act(s, deterministic=True)
        )
        q_a = agent._q_rows(agent._q1, s[None, :], np.zeros((1, 2)))
        q_b = loaded._q_rows(loaded._q1, s[None, :], np.zeros((1, 2)))
        np.testing.assert_array_equal(q_a, q_b)
