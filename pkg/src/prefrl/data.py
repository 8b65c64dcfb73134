"""Transitions, segments, preference datasets, and the replay buffer.

The buffer stores both the hidden ground-truth reward (for the teacher and
the evaluator) and the learned reward (what the agent trains on).  The
agent-facing accessor :meth:`ReplayBuffer.sample_batch` deliberately omits
the ground-truth column; teacher-side code asks for segments with
``with_true_rewards=True`` and strips them before anything reaches reward
training.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import ContractError, DimensionError, NotReadyError

SNAPSHOT_VERSION = 1

PREFERENCE_SOURCES = ("scripted", "human", "pseudo")
ADMISSIBLE_LABELS = (0.0, 0.5, 1.0)


@dataclass
class Transition:
    """Storage record for one environment step (oracle view)."""

    state: np.ndarray
    action: np.ndarray
    next_state: np.ndarray
    true_reward: float
    learned_reward: float
    done: bool
    episode_id: int
    step_index: int


class AgentBatch(NamedTuple):
    """Minibatch view handed to the agent: no ground-truth reward field."""

    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    learned_rewards: np.ndarray
    dones: np.ndarray


@dataclass
class Segment:
    """Contiguous (state, action) slice of one episode.

    ``true_rewards`` is an oracle-only annotation used by the scripted
    teacher; it is stripped before segments enter training datasets.
    """

    states: np.ndarray
    actions: np.ndarray
    episode_id: int
    start: int
    true_rewards: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.states) != len(self.actions) or len(self.states) < 1:
            raise ContractError("segment needs >= 1 aligned (state, action) pairs")
        if self.true_rewards is not None and len(self.true_rewards) != len(self.states):
            raise ContractError("true_rewards length mismatch")

    def __len__(self):
        return len(self.states)

    def strip_oracle(self):
        """Copy without the ground-truth annotation."""
        return Segment(self.states, self.actions, self.episode_id, self.start)

    def true_return(self):
        if self.true_rewards is None:
            raise ContractError("segment carries no ground-truth rewards")
        return float(self.true_rewards.sum())


@dataclass
class PreferenceTriple:
    """One labeled comparison (seg0, seg1, y)."""

    seg0: Segment
    seg1: Segment
    label: float
    source: str

    def __post_init__(self):
        if len(self.seg0) != len(self.seg1):
            raise ContractError("compared segments must have equal length")
        if self.label not in ADMISSIBLE_LABELS:
            raise ContractError(f"label must be one of {ADMISSIBLE_LABELS}, got {self.label}")
        if self.source not in PREFERENCE_SOURCES:
            raise ContractError(f"unknown preference source {self.source!r}")


@dataclass
class LabeledDataset:
    """Teacher-labeled preference triples (grows only via teacher answers)."""

    triples: list = field(default_factory=list)

    def add(self, triple):
        if not isinstance(triple, PreferenceTriple):
            raise ContractError("LabeledDataset holds PreferenceTriple entries")
        self.triples.append(triple)

    def extend(self, triples):
        for t in triples:
            self.add(t)

    def __len__(self):
        return len(self.triples)

    def __getitem__(self, i):
        return self.triples[i]

    def __iter__(self):
        return iter(self.triples)


@dataclass
class UnlabeledDataset:
    """Unlabeled segment pairs; cheap to resample, regenerated per session."""

    pairs: list = field(default_factory=list)

    def __len__(self):
        return len(self.pairs)

    def __getitem__(self, i):
        return self.pairs[i]

    def __iter__(self):
        return iter(self.pairs)


def unlabeled_count(session_labels, budget):
    """Unlabeled pairs to draw for a session: 10x the session's labels for
    budgets of at least 1000, 100x for smaller budgets."""
    ratio = 10 if budget >= 1000 else 100
    return ratio * session_labels


@dataclass
class _Episode:
    episode_id: int
    start: int  # logical position of the first transition
    length: int
    done: bool


class ReplayBuffer:
    """Fixed-capacity FIFO transition store with episode bookkeeping.

    One writer (the rollout loop); readers may sample concurrently between
    writes.  Relabeling requires exclusive access, which the runner
    enforces by relabeling only at session boundaries.
    """

    def __init__(self, state_dim, action_dim, capacity=100_000):
        if capacity < 1:
            raise ContractError("capacity must be positive")
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.capacity = capacity
        self._states = np.zeros((capacity, state_dim))
        self._actions = np.zeros((capacity, action_dim))
        self._next_states = np.zeros((capacity, state_dim))
        self._true_rewards = np.zeros(capacity)
        self._learned_rewards = np.zeros(capacity)
        self._dones = np.zeros(capacity, dtype=bool)
        self._next = 0  # logical write position == number of adds so far
        self._episodes: list[_Episode] = []
        self._next_episode_id = 0
        self._open: Optional[_Episode] = None

    # -- writing ----------------------------------------------------------

    def begin_episode(self):
        ep = _Episode(self._next_episode_id, self._next, 0, done=False)
        self._next_episode_id += 1
        self._episodes.append(ep)
        self._open = ep
        return ep.episode_id

    def add(self, state, action, next_state, true_reward, done, learned_reward=0.0):
        if self._open is None or self._open.done:
            raise ContractError("begin_episode() before adding transitions")
        state = np.asarray(state, dtype=np.float64)
        action = np.asarray(action, dtype=np.float64)
        next_state = np.asarray(next_state, dtype=np.float64)
        if state.shape != (self.state_dim,) or next_state.shape != (self.state_dim,):
            raise DimensionError(f"state shape must be ({self.state_dim},)")
        if action.shape != (self.action_dim,):
            raise DimensionError(f"action shape must be ({self.action_dim},)")
        row = self._next % self.capacity
        self._states[row] = state
        self._actions[row] = action
        self._next_states[row] = next_state
        self._true_rewards[row] = true_reward
        self._learned_rewards[row] = learned_reward
        self._dones[row] = done
        self._next += 1
        self._open.length += 1
        if done:
            self._open.done = True
            self._open = None
        self._prune_dead_episodes()

    def _prune_dead_episodes(self):
        lo = self._alive_lo()
        while self._episodes and self._episodes[0].start + self._episodes[0].length <= lo:
            dead = self._episodes.pop(0)
            if self._open is dead:
                self._open = None

    # -- geometry ---------------------------------------------------------

    @property
    def size(self):
        return min(self._next, self.capacity)

    def _alive_lo(self):
        return self._next - self.size

    def __len__(self):
        return self.size

    @property
    def n_episodes(self):
        return len(self._episodes)

    def _episode_by_id(self, episode_id):
        for ep in self._episodes:
            if ep.episode_id == episode_id:
                return ep
        raise ContractError(f"episode {episode_id} not in buffer")

    def _alive_range(self, ep):
        """Logical [lo, hi) of the still-stored portion of an episode."""
        return max(ep.start, self._alive_lo()), ep.start + ep.length

    def _rows(self, logical_lo, logical_hi):
        return np.arange(logical_lo, logical_hi) % self.capacity

    # -- reading ----------------------------------------------------------

    def transition(self, episode_id, step_index):
        """Oracle view of a single stored transition (tests/teacher only)."""
        ep = self._episode_by_id(episode_id)
        logical = ep.start + step_index
        lo, hi = self._alive_range(ep)
        if not lo <= logical < hi:
            raise ContractError("transition evicted or out of range")
        row = logical % self.capacity
        return Transition(
            state=self._states[row].copy(),
            action=self._actions[row].copy(),
            next_state=self._next_states[row].copy(),
            true_reward=float(self._true_rewards[row]),
            learned_reward=float(self._learned_rewards[row]),
            done=bool(self._dones[row]),
            episode_id=episode_id,
            step_index=step_index,
        )

    def segment(self, episode_id, start, length, with_true_rewards=False):
        """Extract `length` consecutive steps of an episode, starting at the
        episode-local index `start`."""
        if length < 1:
            raise ContractError("segment length must be >= 1")
        ep = self._episode_by_id(episode_id)
        lo, hi = self._alive_range(ep)
        logical = ep.start + start
        if logical < lo or logical + length > hi:
            raise ContractError("requested segment is not fully stored")
        rows = self._rows(logical, logical + length)
        return Segment(
            states=self._states[rows].copy(),
            actions=self._actions[rows].copy(),
            episode_id=episode_id,
            start=start,
            true_rewards=self._true_rewards[rows].copy() if with_true_rewards else None,
        )

    def _segment_slots(self, length):
        """(episode, first_start, n_slots) for every episode that can yield
        a segment of the requested length."""
        slots = []
        for ep in self._episodes:
            lo, hi = self._alive_range(ep)
            n = hi - lo - length + 1
            if n > 0:
                slots.append((ep, lo - ep.start, n))
        return slots

    def sample_segment_pair(self, length, rng, with_true_rewards=False):
        """Two segments drawn uniformly over valid (episode, start) slots;
        the two draws never land on the identical slot."""
        slots = self._segment_slots(length)
        if len(slots) < 2:
            raise NotReadyError(
                f"need >= 2 episodes with >= {length} stored steps, have {len(slots)}"
            )
        total = sum(n for _, _, n in slots)
        i = int(rng.integers(total))
        j = int(rng.integers(total - 1))
        if j >= i:
            j += 1

        def locate(flat):
            for ep, first, n in slots:
                if flat < n:
                    return ep.episode_id, first + flat
                flat -= n
            raise AssertionError("flat slot index out of range")

        ep_i, start_i = locate(i)
        ep_j, start_j = locate(j)
        return (
            self.segment(ep_i, start_i, length, with_true_rewards),
            self.segment(ep_j, start_j, length, with_true_rewards),
        )

    def extract_unlabeled(self, count, length, rng):
        """Fresh dataset of `count` independent unlabeled segment pairs."""
        if count < 0:
            raise ContractError("count must be >= 0")
        pairs = []
        for _ in range(count):
            s0, s1 = self.sample_segment_pair(length, rng, with_true_rewards=False)
            pairs.append((s0, s1))
        return UnlabeledDataset(pairs)

    def sample_batch(self, batch_size, rng):
        """Agent-facing minibatch; exposes learned rewards only."""
        if self.size < 1:
            raise NotReadyError("buffer is empty")
        idx = rng.integers(0, self.size, size=batch_size)
        rows = (self._alive_lo() + idx) % self.capacity
        return AgentBatch(
            states=self._states[rows].copy(),
            actions=self._actions[rows].copy(),
            next_states=self._next_states[rows].copy(),
            learned_rewards=self._learned_rewards[rows].copy(),
            dones=self._dones[rows].astype(np.float64),
        )

    # -- relabeling -------------------------------------------------------

    def relabel_all(self, ensemble, chunk=8192):
        """Set every stored learned reward to the ensemble-mean reward under
        the current parameters.  Idempotent for fixed parameters."""
        n = self.size
        lo = self._alive_lo()
        for off in range(0, n, chunk):
            rows = self._rows(lo + off, lo + min(off + chunk, n))
            self._learned_rewards[rows] = ensemble.reward_rows(
                self._states[rows], self._actions[rows]
            )
        return n

    # -- snapshots --------------------------------------------------------

    def save(self, path):
        """Versioned binary snapshot (single .npz file, format documented in
        the README)."""
        episodes = np.array(
            [(ep.episode_id, ep.start, ep.length, ep.done) for ep in self._episodes],
            dtype=np.int64,
        ).reshape(-1, 4)
        np.savez_compressed(
            path,
            format_version=np.int64(SNAPSHOT_VERSION),
            state_dim=np.int64(self.state_dim),
            action_dim=np.int64(self.action_dim),
            capacity=np.int64(self.capacity),
            next=np.int64(self._next),
            next_episode_id=np.int64(self._next_episode_id),
            open_episode=np.int64(self._open.episode_id if self._open else -1),
            states=self._states,
            actions=self._actions,
            next_states=self._next_states,
            true_rewards=self._true_rewards,
            learned_rewards=self._learned_rewards,
            dones=self._dones,
            episodes=episodes,
        )

    @classmethod
    def load(cls, path):
        with np.load(path) as z:
            version = int(z["format_version"])
            if version != SNAPSHOT_VERSION:
                raise ContractError(
                    f"snapshot version {version} unsupported (expected {SNAPSHOT_VERSION})"
                )
            buf = cls(int(z["state_dim"]), int(z["action_dim"]), int(z["capacity"]))
            buf._states = z["states"].copy()
            buf._actions = z["actions"].copy()
            buf._next_states = z["next_states"].copy()
            buf._true_rewards = z["true_rewards"].copy()
            buf._learned_rewards = z["learned_rewards"].copy()
            buf._dones = z["dones"].copy()
            buf._next = int(z["next"])
            buf._next_episode_id = int(z["next_episode_id"])
            open_id = int(z["open_episode"])
            for ep_id, start, length, done in z["episodes"]:
                ep = _Episode(int(ep_id), int(start), int(length), bool(done))
                buf._episodes.append(ep)
                if ep.episode_id == open_id:
                    buf._open = ep
        return buf
