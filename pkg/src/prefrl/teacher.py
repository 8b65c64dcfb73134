"""Preference sources and query selection.

The scripted teacher labels a pair by comparing ground-truth return sums
(with an optional indifference band); the human path runs through a
thread-safe inbox that the HTTP service writes answers into.  Query
selection is either uniform or disagreement-based (largest ensemble std of
the preference probability, stable tie-break).
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass

import numpy as np

from .data import PreferenceTriple
from .errors import ConflictError, ContractError, UnknownQueryError

CHOICES = ("left", "right", "equal", "skip")
_CHOICE_TO_LABEL = {"left": 0.0, "right": 1.0, "equal": 0.5}


@dataclass(frozen=True)
class ScriptedTeacher:
    """Oracle teacher: y follows the ground-truth return comparison exactly,
    with |difference| <= equal_epsilon mapped to the indifferent label."""

    equal_epsilon: float = 0.0

    def __post_init__(self):
        if self.equal_epsilon < 0.0:
            raise ContractError("equal_epsilon must be >= 0")

    def label(self, seg0, seg1):
        if len(seg0) != len(seg1):
            raise ContractError("compared segments must have equal length")
        r0, r1 = seg0.true_return(), seg1.true_return()
        if r1 > r0 + self.equal_epsilon:
            return 1.0
        if r0 > r1 + self.equal_epsilon:
            return 0.0
        return 0.5


def scripted_label(teacher, seg0, seg1):
    return teacher.label(seg0, seg1)


@dataclass(frozen=True)
class QueryPlan:
    """How many candidate pairs to consider and how many to actually ask."""

    initial_batch_size: int
    n_query: int
    strategy: str = "disagreement"

    def __post_init__(self):
        if self.strategy not in ("uniform", "disagreement"):
            raise ContractError(f"unknown strategy {self.strategy!r}")
        if not 0 <= self.n_query <= self.initial_batch_size:
            raise ContractError("need 0 <= n_query <= initial_batch_size")


def select_queries(candidates, plan, ensemble=None, rng=None):
    """Pick plan.n_query pairs from the candidate batch.

    Uniform: a random draw without replacement.  Disagreement: the pairs
    with the largest ensemble std of P[seg1 preferred]; ties broken by
    candidate order so the selection is stable.
    """
    if len(candidates) != plan.initial_batch_size:
        raise ContractError(
            f"expected {plan.initial_batch_size} candidates, got {len(candidates)}"
        )
    if plan.strategy == "uniform":
        if rng is None:
            raise ContractError("uniform selection needs an rng")
        idx = rng.choice(len(candidates), size=plan.n_query, replace=False)
        return [candidates[int(i)] for i in idx]
    if ensemble is None:
        raise ContractError("disagreement selection needs a reward ensemble")
    stds = np.array([ensemble.disagreement(s0, s1) for s0, s1 in candidates])
    order = np.argsort(-stds, kind="stable")[: plan.n_query]
    return [candidates[int(i)] for i in order]


class HumanLabelInbox:
    """Pending-query store shared by the training loop and the label API.

    The trainer issues queries and collects answered triples; the API
    writes answers.  Every id is answered at most once and every accepted
    (non-skip) answer is collected exactly once.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._pending = {}  # id -> (pair, payload)
        self._order = []  # pending ids, oldest first
        self._answers = []  # uncollected (id, pair, label, timestamp)
        self._answered_ids = set()
        self._skipped_ids = set()
        self._counter = 0

    def issue(self, pairs, payloads=None):
        """Register queries; returns their ids.  ``payloads`` are JSON-ready
        dicts served to the labeling client; the assigned query id and an
        issued-at timestamp are stamped into each."""
        if payloads is None:
            payloads = [None] * len(pairs)
        if len(payloads) != len(pairs):
            raise ContractError("one payload per pair required")
        ids = []
        with self._lock:
            for pair, payload in zip(pairs, payloads):
                qid = f"q{self._counter:06d}"
                self._counter += 1
                if isinstance(payload, dict):
                    payload = {**payload, "id": qid, "issued_at": time.time()}
                self._pending[qid] = (pair, payload)
                self._order.append(qid)
                ids.append(qid)
        return ids

    def next_pending(self):
        """Oldest unanswered (id, payload), or None."""
        with self._lock:
            if not self._order:
                return None
            qid = self._order[0]
            return qid, self._pending[qid][1]

    def pending_count(self):
        with self._lock:
            return len(self._order)

    def drop_pending(self):
        """Discard unanswered queries (session timeout); answered ids stay
        known so late duplicates are still rejected."""
        with self._lock:
            dropped = len(self._order)
            self._pending.clear()
            self._order.clear()
            return dropped

    def answer(self, query_id, choice):
        """Record a label for an issued query.

        Unknown ids raise UnknownQueryError; a second answer for any id
        raises ConflictError and leaves the inbox unchanged.
        """
        if choice not in CHOICES:
            raise ContractError(f"choice must be one of {CHOICES}, got {choice!r}")
        with self._lock:
            if query_id in self._answered_ids:
                raise ConflictError(f"query {query_id} already answered")
            if query_id not in self._pending:
                raise UnknownQueryError(f"query {query_id} was never issued")
            pair, _payload = self._pending.pop(query_id)
            self._order.remove(query_id)
            self._answered_ids.add(query_id)
            if choice == "skip":
                self._skipped_ids.add(query_id)
            else:
                self._answers.append((query_id, pair, _CHOICE_TO_LABEL[choice], time.time()))

    def collect(self):
        """All answered-but-unconsumed triples (skips excluded); consuming."""
        with self._lock:
            answers, self._answers = self._answers, []
        triples = []
        for _qid, (seg0, seg1), label, _ts in answers:
            triples.append(
                PreferenceTriple(seg0.strip_oracle(), seg1.strip_oracle(), label, "human")
            )
        return triples


def issue_human_queries(inbox, pairs, payloads=None):
    return inbox.issue(pairs, payloads)


def collect_answers(inbox):
    return inbox.collect()
