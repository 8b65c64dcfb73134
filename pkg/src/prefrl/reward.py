"""Reward ensemble, preference predictor, losses, and the session trainer.

The predictor follows the Bradley-Terry form: the probability that the
second segment of a pair is preferred depends logistically on the
difference of accumulated per-step rewards.  Training minimizes binary
cross-entropy on teacher labels, optionally extended with pseudo-labeled
unlabeled pairs (kept only above a confidence threshold) and with
temporal-crop augmentation of every sampled pair.

Numerical split: training forwards run on the fast matmul kernel; reward
*inference* (buffer relabeling, per-transition queries) runs on the
batch-size-invariant kernel so stored learned rewards can be re-queried
exactly regardless of batching.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import augment
from .checkpoint import load_checkpoint, save_checkpoint
from .data import PreferenceTriple
from .errors import ContractError, DimensionError
from .ndmath import Mlp, ParamSet, Tape, adam_step
from .ndmath import clamp as t_clamp
from .ndmath import log as t_log
from .ndmath import logistic as t_logistic
from .ndmath import mul, neg, reshape, segment_sums, slice1d, sub, tmean

LOG_CLAMP = 1e-12  # floor under log arguments: caps the loss on saturated predictions
PROB_CLAMP = 1e-15  # keeps reported probabilities inside the open interval
DEFAULT_LR = 3e-4


@dataclass(frozen=True)
class SslConfig:
    """Semi-supervised training knobs.

    mu:   unlabeled minibatch size as a multiple of the labeled size
    tau:  confidence threshold for keeping a pseudo-labeled pair
    lam:  weight of the unsupervised loss term
    """

    mu: int = 4
    tau: float = 0.99
    lam: float = 1.0
    batch_size: int = 32
    epochs: int = 40

    def __post_init__(self):
        if not (isinstance(self.mu, int) and self.mu >= 0):
            raise ContractError(f"mu must be a non-negative integer, got {self.mu}")
        if not 0.5 < self.tau < 1.0:
            raise ContractError(f"tau must be in (0.5, 1), got {self.tau}")
        if self.lam < 0.0:
            raise ContractError(f"lam must be >= 0, got {self.lam}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ContractError("batch_size and epochs must be positive")


def _segment_rows(segments):
    """Stack the (state, action) rows of several segments into one matrix."""
    rows = [np.concatenate([s.states, s.actions], axis=1) for s in segments]
    return np.concatenate(rows, axis=0), np.array([len(s) for s in segments])


class RewardNet:
    """One MLP reward model: leaky-ReLU hidden layers, tanh-bounded output."""

    def __init__(self, state_dim, action_dim, hidden=256, hidden_layers=3, rng=None):
        if rng is None:
            rng = np.random.default_rng(0)
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.hidden = hidden
        self.hidden_layers = hidden_layers
        sizes = [state_dim + action_dim] + [hidden] * hidden_layers + [1]
        self.pset = ParamSet()
        self.mlp = Mlp(self.pset, "reward", sizes, rng, out_tanh=True)

    def _check_rows(self, x):
        want = self.state_dim + self.action_dim
        if x.ndim != 2 or x.shape[1] != want:
            raise DimensionError(f"expected rows of width {want}, got {x.shape}")

    def reward_rows(self, x):
        """Per-row reward on the batch-size-invariant inference path."""
        x = np.asarray(x, dtype=np.float64)
        self._check_rows(x)
        return self.mlp.apply(x, stable=True)[:, 0]

    def reward(self, state, action):
        row = np.concatenate([np.asarray(state), np.asarray(action)])[None, :]
        return float(self.reward_rows(row)[0])

    def segment_returns(self, segments):
        """Accumulated reward of each segment (inference path)."""
        rows, lengths = _segment_rows(segments)
        per_step = self.reward_rows(rows)
        offsets = np.zeros(len(lengths), dtype=np.intp)
        np.cumsum(lengths[:-1], out=offsets[1:])
        return np.add.reduceat(per_step, offsets)

    def returns_node(self, segments):
        """Differentiable accumulated returns (training path, records on the
        active tape)."""
        rows, lengths = _segment_rows(segments)
        self._check_rows(rows)
        per_step = self.mlp(rows)  # (N, 1)
        return segment_sums(reshape(per_step, (rows.shape[0],)), lengths)


def segment_return(net, seg):
    """Accumulated predicted reward over one segment."""
    return float(net.segment_returns([seg])[0])


def prob_from_returns(r0, r1):
    """P[second preferred] for scalar accumulated returns, computed in the
    numerically stable logistic form and clamped into the open interval.

    The winning side's probability is computed once and the losing side is
    its exact complement (1 - p is exact for p in [0.5, 1]), so swapping
    the arguments maps p to 1 - p bitwise.
    """
    d = float(r1) - float(r0)
    p_win = min(1.0 / (1.0 + math.exp(-abs(d))), 1.0 - PROB_CLAMP)
    return p_win if d >= 0.0 else 1.0 - p_win


def preference_prob(net, seg0, seg1):
    """P[seg1 preferred over seg0] under one reward net."""
    if len(seg0) != len(seg1):
        raise ContractError("compared segments must have equal length")
    r0, r1 = net.segment_returns([seg0, seg1])
    return prob_from_returns(r0, r1)


def pseudo_label_from_prob(p_first):
    """Pseudo-label from P[first preferred]: 0 when the first segment is the
    more probable winner, 1 otherwise (ties included); confidence is the
    probability assigned to the chosen winner."""
    if p_first > 0.5:
        return 0, p_first
    return 1, 1.0 - p_first


def pseudo_label(net, seg0, seg1):
    """(label, confidence) for an unlabeled pair under one net."""
    p1 = preference_prob(net, seg0, seg1)
    return pseudo_label_from_prob(1.0 - p1)


def _ce_vector(net, pairs, labels):
    """Per-pair cross-entropy as a differentiable vector.

    Segments are forwarded as one row matrix ordered [all firsts, all
    seconds]; log-probabilities are clamped below so saturated predictions
    yield a large, finite loss.
    """
    n = len(pairs)
    segs = [p[0] for p in pairs] + [p[1] for p in pairs]
    returns = net.returns_node(segs)
    r0 = slice1d(returns, 0, n)
    r1 = slice1d(returns, n, 2 * n)
    d = sub(r1, r0)
    log_p1 = t_log(t_clamp(t_logistic(d), lo=LOG_CLAMP))
    log_p0 = t_log(t_clamp(t_logistic(neg(d)), lo=LOG_CLAMP))
    y = np.asarray(labels, dtype=np.float64)
    return neg(mul(log_p0, 1.0 - y) + mul(log_p1, y))


def ce_loss(net, triple):
    """Binary cross-entropy of one labeled comparison (0.5 = soft target)."""
    return tmean(_ce_vector(net, [(triple.seg0, triple.seg1)], [triple.label]))


def ssl_loss(net, labeled_triples, unlabeled_entries, cfg):
    """Supervised mean CE plus lam * mean CE over the retained (confidence
    above tau) pseudo-labeled entries.

    ``unlabeled_entries`` holds (seg0, seg1, pseudo_label, confidence)
    tuples whose pseudo-labels were computed on the un-augmented pairs; the
    segments passed here may already be augmented.  The unsupervised mean
    runs over retained entries only; with none retained the term is zero.
    """
    labeled_triples = list(labeled_triples)
    if not labeled_triples:
        raise ContractError("ssl_loss needs a non-empty labeled batch")
    loss = tmean(
        _ce_vector(
            net,
            [(t.seg0, t.seg1) for t in labeled_triples],
            [t.label for t in labeled_triples],
        )
    )
    retained = [(s0, s1, yhat) for s0, s1, yhat, conf in unlabeled_entries if conf > cfg.tau]
    if retained and cfg.lam > 0.0:
        unsup = tmean(
            _ce_vector(net, [(s0, s1) for s0, s1, _ in retained], [y for _, _, y in retained])
        )
        loss = loss + mul(unsup, cfg.lam)
    return loss


class RewardEnsemble:
    """Independently initialized reward nets trained on the same labels.

    Members self-train on their own pseudo-labels, which preserves the
    diversity that disagreement-based query selection relies on.
    """

    def __init__(self, state_dim, action_dim, n_members=3, hidden=256,
                 hidden_layers=3, lr=DEFAULT_LR, seed=0):
        if n_members < 1:
            raise ContractError("ensemble needs at least one member")
        self.lr = lr
        self.seed = seed
        seqs = np.random.SeedSequence(seed).spawn(n_members)
        self.members = [
            RewardNet(state_dim, action_dim, hidden, hidden_layers,
                      rng=np.random.default_rng(s))
            for s in seqs
        ]

    @property
    def state_dim(self):
        return self.members[0].state_dim

    @property
    def action_dim(self):
        return self.members[0].action_dim

    def reward_rows(self, states, actions):
        """Ensemble-mean reward per (state, action) row; inference path."""
        x = np.concatenate(
            [np.asarray(states, dtype=np.float64), np.asarray(actions, dtype=np.float64)],
            axis=1,
        )
        total = self.members[0].reward_rows(x)
        for member in self.members[1:]:
            total = total + member.reward_rows(x)
        return total / len(self.members)

    def reward(self, state, action):
        return float(
            self.reward_rows(np.asarray(state)[None, :], np.asarray(action)[None, :])[0]
        )

    def preference_prob(self, seg0, seg1):
        """Mean of the member predictors' probabilities."""
        probs = [preference_prob(m, seg0, seg1) for m in self.members]
        return float(np.mean(probs))

    def member_probs(self, seg0, seg1):
        return [preference_prob(m, seg0, seg1) for m in self.members]

    def disagreement(self, seg0, seg1):
        """Std of P[seg1 preferred] across members."""
        if len(self.members) < 2:
            raise ContractError("disagreement needs an ensemble of >= 2 members")
        return disagreement_from_probs(self.member_probs(seg0, seg1))

    def save(self, path):
        arrays = {}
        for i, member in enumerate(self.members):
            for key, value in member.pset.state_dict().items():
                arrays[f"member{i}/{key}"] = np.asarray(value)
        meta = {
            "state_dim": self.state_dim,
            "action_dim": self.action_dim,
            "n_members": len(self.members),
            "hidden": self.members[0].hidden,
            "hidden_layers": self.members[0].hidden_layers,
            "lr": self.lr,
            "seed": self.seed,
        }
        save_checkpoint(path, "reward_ensemble", meta, arrays)

    @classmethod
    def load(cls, path):
        _, meta, arrays = load_checkpoint(path, expect_kind="reward_ensemble")
        ens = cls(
            meta["state_dim"], meta["action_dim"], meta["n_members"],
            meta["hidden"], meta["hidden_layers"], meta["lr"], meta["seed"],
        )
        for i, member in enumerate(ens.members):
            prefix = f"member{i}/"
            state = {k[len(prefix):]: v for k, v in arrays.items() if k.startswith(prefix)}
            member.pset.load_state_dict(state)
        return ens


def disagreement_from_probs(probs):
    """Population standard deviation of per-member preference probabilities."""
    return float(np.std(np.asarray(probs, dtype=np.float64)))


def ensemble_reward(ensemble, state, action):
    return ensemble.reward(state, action)


def ensemble_disagreement(ensemble, seg0, seg1):
    return ensemble.disagreement(seg0, seg1)


def preference_accuracy(ensemble, triples):
    """Fraction of decisive (y != 0.5) triples on which the ensemble-mean
    predictor picks the labeled winner; None with no decisive triples."""
    hits = total = 0
    for t in triples:
        if t.label == 0.5:
            continue
        p1 = ensemble.preference_prob(t.seg0, t.seg1)
        predicted = 1.0 if p1 >= 0.5 else 0.0
        hits += int(predicted == t.label)
        total += 1
    return (hits / total) if total else None


@dataclass
class TrainStats:
    mean_loss: float
    retained_fraction: float
    labeled_accuracy: float | None
    steps: int


def _member_pseudo_labels(member, pairs):
    """Vectorized (label, confidence) for a list of pairs under one member,
    evaluated on the un-augmented segments."""
    n = len(pairs)
    returns = member.segment_returns([p[0] for p in pairs] + [p[1] for p in pairs])
    labels = np.empty(n, dtype=np.int64)
    confs = np.empty(n)
    for i in range(n):
        p1 = prob_from_returns(returns[i], returns[n + i])
        labels[i], confs[i] = pseudo_label_from_prob(1.0 - p1)
    return labels, confs


def train_session(ensemble, labeled, unlabeled, cfg, aug, rng):
    """One feedback-session training run over the ensemble.

    Per gradient step and member: draw a labeled minibatch and an unlabeled
    minibatch (mu * batch_size pairs), pseudo-label the unlabeled pairs on
    their original segments, apply the configured augmentation with fresh
    draws to every pair that enters the loss, and take one Adam step on the
    combined objective.  Pairs dropped by the confidence threshold are
    dropped before augmentation; the unsupervised mean is over retained
    entries, so skipping their crops changes nothing but saves compute.
    """
    n_l = len(labeled)
    if n_l == 0:
        raise ContractError("train_session needs a non-empty labeled dataset")
    n_u = len(unlabeled)
    steps = cfg.epochs * max(1, math.ceil(n_l / cfg.batch_size))
    mu_b = cfg.mu * cfg.batch_size

    losses = []
    retained_fractions = []
    for _ in range(steps):
        for member in ensemble.members:
            if n_l >= cfg.batch_size:
                idx = rng.choice(n_l, size=cfg.batch_size, replace=False)
            else:
                idx = rng.integers(0, n_l, size=cfg.batch_size)
            batch = [labeled[int(i)] for i in idx]

            entries = []
            if mu_b > 0 and n_u > 0 and cfg.lam > 0.0:
                uidx = rng.integers(0, n_u, size=mu_b)
                upairs = [unlabeled[int(i)] for i in uidx]
                labels, confs = _member_pseudo_labels(member, upairs)
                for (s0, s1), yhat, conf in zip(upairs, labels, confs):
                    if conf > cfg.tau:
                        a0, a1 = augment.augment_pair(s0, s1, aug, rng)
                        entries.append((a0, a1, float(yhat), float(conf)))
                retained_fractions.append(len(entries) / mu_b)
            else:
                retained_fractions.append(0.0)

            cropped = []
            for t in batch:
                a0, a1 = augment.augment_pair(t.seg0, t.seg1, aug, rng)
                cropped.append(PreferenceTriple(a0, a1, t.label, t.source))

            with Tape() as tape:
                loss = ssl_loss(member, cropped, entries, cfg)
            adam_step(member.pset, tape.gradients(loss), lr=ensemble.lr)
            losses.append(loss.item())

    return TrainStats(
        mean_loss=float(np.mean(losses)),
        retained_fraction=float(np.mean(retained_fractions)),
        labeled_accuracy=preference_accuracy(ensemble, labeled),
        steps=steps,
    )
