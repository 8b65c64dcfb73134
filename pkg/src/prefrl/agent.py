"""Soft actor-critic agent with state-entropy unsupervised pre-training.

The actor is a squashed-Gaussian policy; the critic is a twin Q pair with
EMA target copies.  Pre-training replaces the (not yet learned) reward
with a particle-based state-entropy proxy: the log distance to the k-th
nearest neighbor within the sampled batch, which pushes the policy toward
sparsely visited states.  Nothing in this module reads the environment's
ground-truth reward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .errors import ContractError, DimensionError
from .ndmath import (
    Affine,
    Mlp,
    ParamSet,
    Tape,
    Tensor,
    adam_step,
    clamp,
    concat_cols,
    ema_update,
    exp as t_exp,
    leaky_relu,
    log as t_log,
    minimum,
    mul,
    reshape,
    sub,
    tanh as t_tanh,
    tmean,
    tsum,
)
from .ndmath import backend as nd_backend

LOGSTD_MIN = -10.0
LOGSTD_MAX = 2.0
_SQUASH_EPS = 1e-6
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class AgentConfig:
    """Desk-scale defaults; ``full_scale()`` gives the large-task preset."""

    hidden: int = 64
    gamma: float = 0.99
    temperature: float = 0.1
    auto_temperature: bool = False
    lr: float = 3e-4
    batch_size: int = 128
    tau_ema: float = 0.005
    target_update_freq: int = 2
    pretrain_steps: int = 2000
    knn_k: int = 5
    init_random_steps: int = 200

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ContractError(f"gamma must be in [0, 1), got {self.gamma}")
        if self.temperature < 0.0:
            raise ContractError("temperature must be >= 0")

    @classmethod
    def full_scale(cls, **overrides):
        base = dict(hidden=256, batch_size=512, pretrain_steps=10_000)
        base.update(overrides)
        return cls(**base)


class SacAgent:
    def __init__(self, state_dim, action_dim, cfg=None, rng=None):
        self.cfg = cfg or AgentConfig()
        self.state_dim = state_dim
        self.action_dim = action_dim
        self._rng = rng if rng is not None else np.random.default_rng(0)
        h = self.cfg.hidden

        self.actor_pset = ParamSet()
        self._trunk = [
            Affine(self.actor_pset, "trunk.0", state_dim, h, self._rng),
            Affine(self.actor_pset, "trunk.1", h, h, self._rng),
        ]
        self._mean_head = Affine(self.actor_pset, "mean", h, action_dim, self._rng)
        self._logstd_head = Affine(self.actor_pset, "logstd", h, action_dim, self._rng)

        self.critic_pset = ParamSet()
        self._q1 = Mlp(self.critic_pset, "q1", [state_dim + action_dim, h, h, 1], self._rng)
        self._q2 = Mlp(self.critic_pset, "q2", [state_dim + action_dim, h, h, 1], self._rng)
        self.target_pset = ParamSet()
        self._q1t = Mlp(self.target_pset, "q1", [state_dim + action_dim, h, h, 1], self._rng)
        self._q2t = Mlp(self.target_pset, "q2", [state_dim + action_dim, h, h, 1], self._rng)
        self.target_pset.copy_values_from(self.critic_pset)

        self._log_alpha_pset = ParamSet()
        self._log_alpha = self._log_alpha_pset.add(
            "log_alpha", np.log(max(self.cfg.temperature, 1e-8))
        )
        self.n_updates = 0

    # -- policy, array path -------------------------------------------------

    def _policy_rows(self, states):
        K = nd_backend.kernels
        h = np.ascontiguousarray(states, dtype=np.float64)
        for layer in self._trunk:
            h = K.leaky_relu(layer.apply(h), 0.01)
        mean = self._mean_head.apply(h)
        logstd = np.clip(self._logstd_head.apply(h), LOGSTD_MIN, LOGSTD_MAX)
        return mean, logstd

    def sample_actions_rows(self, states, rng):
        """Squashed-Gaussian actions and their log-probabilities."""
        mean, logstd = self._policy_rows(states)
        std = np.exp(logstd)
        eps = rng.standard_normal(mean.shape)
        u = mean + std * eps
        actions = np.tanh(u)
        logpi = (
            -0.5 * eps * eps - logstd - 0.5 * _LOG_2PI
            - np.log(1.0 - actions * actions + _SQUASH_EPS)
        ).sum(axis=1)
        return actions, logpi

    def act(self, state, deterministic=False):
        state = np.asarray(state, dtype=np.float64)
        if state.shape != (self.state_dim,):
            raise DimensionError(f"state shape must be ({self.state_dim},)")
        if deterministic:
            mean, _ = self._policy_rows(state[None, :])
            return np.tanh(mean[0])
        actions, _ = self.sample_actions_rows(state[None, :], self._rng)
        return actions[0]

    # -- losses, tape path ---------------------------------------------------

    def _q_rows(self, mlp, states, actions):
        x = np.concatenate([states, actions], axis=1)
        return mlp.apply(x)[:, 0]

    def critic_targets(self, batch, rng):
        """Soft Bellman backup values for a minibatch (no gradients)."""
        a2, logpi2 = self.sample_actions_rows(batch.next_states, rng)
        q1t = self._q_rows(self._q1t, batch.next_states, a2)
        q2t = self._q_rows(self._q2t, batch.next_states, a2)
        soft_v = np.minimum(q1t, q2t) - self.temperature * logpi2
        return batch.learned_rewards + self.cfg.gamma * (1.0 - batch.dones) * soft_v

    def critic_loss_graph(self, states, actions, targets):
        x = Tensor(np.concatenate([states, actions], axis=1))
        y = Tensor(targets)
        n = states.shape[0]
        q1 = reshape(self._q1(x), (n,))
        q2 = reshape(self._q2(x), (n,))
        d1 = sub(q1, y)
        d2 = sub(q2, y)
        return tmean(mul(d1, d1)) + tmean(mul(d2, d2))

    def actor_loss_graph(self, states, eps):
        """Reparameterized policy loss; `eps` is the frozen Gaussian draw."""
        n = states.shape[0]
        h = Tensor(states)
        for layer in self._trunk:
            h = leaky_relu(layer(h), 0.01)
        mean = self._mean_head(h)
        logstd = clamp(self._logstd_head(h), LOGSTD_MIN, LOGSTD_MAX)
        std = t_exp(logstd)
        u = mean + mul(std, Tensor(eps))
        actions = t_tanh(u)
        # N(u; mean, std) evaluated at the reparameterized sample: the
        # quadratic term reduces to the constant -eps^2/2.
        const = Tensor(-0.5 * eps * eps - 0.5 * _LOG_2PI)
        squash = t_log(sub(Tensor(1.0 + _SQUASH_EPS), mul(actions, actions)))
        logpi = tsum(sub(sub(const, logstd), squash), axis=1)
        q_in = concat_cols(Tensor(states), actions)
        q1 = reshape(self._q1(q_in), (n,))
        q2 = reshape(self._q2(q_in), (n,))
        return tmean(sub(mul(logpi, self.temperature), minimum(q1, q2))), logpi

    @property
    def temperature(self):
        if self.cfg.auto_temperature:
            return float(np.exp(self._log_alpha.data))
        return self.cfg.temperature

    def update(self, batch, rewards_override=None):
        """One critic step and one actor step on an agent-facing batch.

        ``rewards_override`` substitutes the stored learned rewards (used
        by pre-training to plug in the intrinsic reward).
        """
        if rewards_override is not None:
            batch = batch._replace(learned_rewards=np.asarray(rewards_override))
        targets = self.critic_targets(batch, self._rng)

        with Tape() as tape:
            critic_loss = self.critic_loss_graph(batch.states, batch.actions, targets)
        adam_step(self.critic_pset, tape.gradients(critic_loss), lr=self.cfg.lr)

        eps = self._rng.standard_normal((batch.states.shape[0], self.action_dim))
        with Tape() as tape:
            actor_loss, logpi = self.actor_loss_graph(batch.states, eps)
        adam_step(self.actor_pset, tape.gradients(actor_loss), lr=self.cfg.lr)

        if self.cfg.auto_temperature:
            target_entropy = -float(self.action_dim)
            with Tape() as tape:
                alpha_loss = mul(
                    self._log_alpha, -float(np.mean(logpi.data) + target_entropy)
                )
            adam_step(self._log_alpha_pset, tape.gradients(alpha_loss), lr=self.cfg.lr)

        self.n_updates += 1
        if self.n_updates % self.cfg.target_update_freq == 0:
            ema_update(self.target_pset, self.critic_pset, self.cfg.tau_ema)
        return {"critic_loss": critic_loss.item(), "actor_loss": actor_loss.item()}

    # -- checkpoints ----------------------------------------------------------

    def save(self, path, extra_meta=None):
        arrays = {}
        for prefix, pset in (
            ("actor", self.actor_pset),
            ("critic", self.critic_pset),
            ("target", self.target_pset),
            ("alpha", self._log_alpha_pset),
        ):
            for key, value in pset.state_dict().items():
                arrays[f"{prefix}/{key}"] = np.asarray(value)
        meta = {
            "state_dim": self.state_dim,
            "action_dim": self.action_dim,
            "hidden": self.cfg.hidden,
            "gamma": self.cfg.gamma,
            "temperature": self.cfg.temperature,
            "n_updates": self.n_updates,
        }
        meta.update(extra_meta or {})
        save_checkpoint(path, "agent", meta, arrays)
        return meta

    @classmethod
    def load(cls, path, rng=None):
        _, meta, arrays = load_checkpoint(path, expect_kind="agent")
        cfg = AgentConfig(
            hidden=int(meta["hidden"]),
            gamma=float(meta["gamma"]),
            temperature=float(meta["temperature"]),
        )
        agent = cls(int(meta["state_dim"]), int(meta["action_dim"]), cfg, rng)
        for prefix, pset in (
            ("actor", agent.actor_pset),
            ("critic", agent.critic_pset),
            ("target", agent.target_pset),
            ("alpha", agent._log_alpha_pset),
        ):
            state = {
                k[len(prefix) + 1 :]: v
                for k, v in arrays.items()
                if k.startswith(prefix + "/")
            }
            pset.load_state_dict(state)
        agent.n_updates = int(meta["n_updates"])
        return agent, meta


def intrinsic_entropy_reward(states, k):
    """log distance to the k-th nearest neighbor within the batch (distance
    floored at 1e-6 so duplicates stay finite)."""
    states = np.asarray(states, dtype=np.float64)
    n = states.shape[0]
    if n <= k:
        raise ContractError(f"entropy estimator needs batch > k, got {n} <= {k}")
    d2 = nd_backend.kernels.pairwise_sq_dists(states)
    d2.sort(axis=1)
    kth = np.sqrt(d2[:, k])  # column 0 is the self-distance
    return np.log(np.maximum(kth, 1e-6))


def pretrain(agent, env, buffer, steps, rng):
    """Fill the buffer and shape the policy with intrinsic rewards only.

    Stored transitions keep the learned-reward placeholder 0; the
    intrinsic reward is substituted per update batch, never persisted.
    """
    if steps <= 0:
        return buffer
    cfg = agent.cfg
    state = env.reset(rng)
    buffer.begin_episode()
    for step in range(steps):
        if step < cfg.init_random_steps:
            action = rng.uniform(env.spec.action_low, env.spec.action_high,
                                 size=env.spec.action_dim)
        else:
            action = agent.act(state)
        next_state, true_reward, done = env.step(action)
        buffer.add(state, action, next_state, true_reward, done)
        state = next_state
        if done and step + 1 < steps:
            state = env.reset(rng)
            buffer.begin_episode()
        if buffer.size >= cfg.batch_size:
            batch = buffer.sample_batch(cfg.batch_size, rng)
            r_int = intrinsic_entropy_reward(batch.states, cfg.knn_k)
            agent.update(batch, rewards_override=r_int)
    return buffer
