"""Toy control environments with known ground-truth rewards.

Two analytic tasks stand in for full-scale benchmark suites: an easy
dense-reward point-mass reaching task and a harder nonlinear pendulum
swing-up.  Dynamics are deterministic given (state, action); only reset
draws from the supplied rng.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DimensionError


@dataclass(frozen=True)
class EnvSpec:
    name: str
    state_dim: int
    action_dim: int
    action_low: float
    action_high: float
    episode_len: int


class PointMassReach:
    """Velocity-damped double integrator rewarded for sitting at the origin.

    State (x, y, vx, vy), 2-D force action in [-1, 1]^2, dt = 0.05,
    damping 0.95.  Per-step reward exp(-|p|^2) in (0, 1].  Positions are
    clipped to [-2, 2].
    """

    DT = 0.05
    DAMPING = 0.95
    POS_LIM = 2.0

    spec = EnvSpec("point_mass_reach", state_dim=4, action_dim=2,
                   action_low=-1.0, action_high=1.0, episode_len=100)

    def __init__(self):
        self._state = None
        self._t = 0

    def reset(self, rng):
        pos = rng.uniform(-1.0, 1.0, size=2)
        self._state = np.array([pos[0], pos[1], 0.0, 0.0])
        self._t = 0
        return self._state.copy()

    def step(self, action):
        if self._state is None:
            raise ContractError("step before reset")
        a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
        x, y, vx, vy = self._state
        vx = self.DAMPING * vx + self.DT * a[0]
        vy = self.DAMPING * vy + self.DT * a[1]
        x = np.clip(x + self.DT * vx, -self.POS_LIM, self.POS_LIM)
        y = np.clip(y + self.DT * vy, -self.POS_LIM, self.POS_LIM)
        self._state = np.array([x, y, vx, vy])
        self._t += 1
        reward = float(np.exp(-(x * x + y * y)))
        done = self._t >= self.spec.episode_len
        return self._state.copy(), reward, done


class PendulumSwingUp:
    """Torque-limited pendulum; angle 0 is upright, pi is hanging down.

    State (cos th, sin th, thdot), torque in [-1, 1], dt = 0.05.  Reward
    (1 + cos th)/2 - 0.01 thdot^2 - 0.001 a^2, so hanging at rest scores 0
    and balancing upright scores ~1.  Underactuated: max torque is well
    below gravity, so swing-up requires pumping.
    """

    DT = 0.05
    G = 10.0
    MASS = 1.0
    LENGTH = 1.0
    MAX_SPEED = 8.0

    spec = EnvSpec("pendulum_swing_up", state_dim=3, action_dim=1,
                   action_low=-1.0, action_high=1.0, episode_len=200)

    def __init__(self):
        self._theta = None
        self._thdot = 0.0
        self._t = 0

    def _obs(self):
        return np.array([np.cos(self._theta), np.sin(self._theta), self._thdot])

    def reset(self, rng):
        self._theta = np.pi + rng.uniform(-0.1, 0.1)
        self._thdot = 0.0
        self._t = 0
        return self._obs()

    def step(self, action):
        if self._theta is None:
            raise ContractError("step before reset")
        a = float(np.clip(np.asarray(action, dtype=np.float64).reshape(-1)[0], -1.0, 1.0))
        accel = (3.0 * self.G / (2.0 * self.LENGTH)) * np.sin(self._theta)
        accel += (3.0 / (self.MASS * self.LENGTH**2)) * a
        self._thdot = float(np.clip(self._thdot + self.DT * accel, -self.MAX_SPEED, self.MAX_SPEED))
        self._theta = float((self._theta + self.DT * self._thdot + np.pi) % (2 * np.pi) - np.pi)
        self._t += 1
        reward = float((1.0 + np.cos(self._theta)) / 2.0
                       - 0.01 * self._thdot**2
                       - 0.001 * a * a)
        done = self._t >= self.spec.episode_len
        return self._obs(), reward, done


_REGISTRY = {
    PointMassReach.spec.name: PointMassReach,
    PendulumSwingUp.spec.name: PendulumSwingUp,
}


def env_names():
    return sorted(_REGISTRY)


def make(name):
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise ContractError(f"unknown env {name!r}; choose from {env_names()}") from None


def render_trajectory(env, segment):
    """Drawable 2-D coordinates per step of a segment, for playback UIs.

    Point mass: the (x, y) position.  Pendulum: the bob position
    (sin th, -cos th) on the unit circle.
    """
    states = segment.states
    if states.shape[1] != env.spec.state_dim:
        raise DimensionError(
            f"segment state dim {states.shape[1]} does not match env "
            f"{env.spec.name!r} ({env.spec.state_dim})"
        )
    if env.spec.name == "point_mass_reach":
        coords = states[:, :2]
    else:
        coords = np.stack([states[:, 1], -states[:, 0]], axis=1)
    return [[float(x), float(y)] for x, y in coords]
