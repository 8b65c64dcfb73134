"""Full training loop: pre-training, feedback sessions, agent updates.

Session ordering is fixed: obtain labels, rebuild the unlabeled pool,
train the reward ensemble, relabel the buffer, and only then resume agent
updates.  The scripted path labels synchronously; the human path collects
whatever answers arrived since the previous session, then issues the next
query batch before training so labeling can overlap with it.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from . import envs
from .agent import SacAgent, pretrain
from .data import (
    LabeledDataset,
    PreferenceTriple,
    ReplayBuffer,
    UnlabeledDataset,
    unlabeled_count,
)
from .errors import ContractError, NotReadyError
from .metrics import MetricsRecord, MetricsWriter
from .reward import RewardEnsemble, preference_accuracy, train_session
from .teacher import QueryPlan, ScriptedTeacher, select_queries


class RunStatus:
    """Thread-safe snapshot of run progress for the HTTP status endpoint."""

    def __init__(self, budget=0):
        self._lock = threading.Lock()
        self._data = {
            "step": 0,
            "labels_used": 0,
            "budget": budget,
            "latest_return": None,
            "pending_queries": 0,
            "running": False,
        }

    def update(self, **kwargs):
        with self._lock:
            self._data.update(kwargs)

    def snapshot(self):
        with self._lock:
            return dict(self._data)


@dataclass
class RunResult:
    records: list = field(default_factory=list)
    labels_used: int = 0
    final_return: float | None = None
    heldout_accuracy: float | None = None
    mean_retained_fraction: float | None = None
    agent: SacAgent | None = None
    ensemble: RewardEnsemble | None = None
    buffer: ReplayBuffer | None = None
    labeled: LabeledDataset | None = None
    heldout: list = field(default_factory=list)


def evaluate(agent, env, episodes, seed):
    """Mean ground-truth return of the deterministic policy."""
    rng = np.random.default_rng(seed)
    returns = []
    for _ in range(episodes):
        state = env.reset(rng)
        total, done = 0.0, False
        while not done:
            state, r, done = env.step(agent.act(state, deterministic=True))
            total += r
        returns.append(total)
    return float(np.mean(returns))


def run(config, inbox=None, status=None, metrics_path=None):
    """Execute one experiment; returns the metrics series and final models."""
    config.validate()
    if config.teacher == "human" and inbox is None:
        raise ContractError("human teacher requires a HumanLabelInbox")
    status = status or RunStatus(budget=config.budget)
    status.update(budget=config.budget, running=True)

    seeds = np.random.SeedSequence(config.seed).spawn(8)
    rng_env = np.random.default_rng(seeds[0])
    rng_pre = np.random.default_rng(seeds[1])
    rng_batch = np.random.default_rng(seeds[2])
    rng_cand = np.random.default_rng(seeds[3])
    rng_select = np.random.default_rng(seeds[4])
    rng_train = np.random.default_rng(seeds[5])
    rng_agent = np.random.default_rng(seeds[6])
    eval_seq = seeds[7]

    env = envs.make(config.env)
    eval_env = envs.make(config.env)
    agent_cfg = config.agent_config()
    agent = SacAgent(env.spec.state_dim, env.spec.action_dim, agent_cfg, rng_agent)
    ensemble = RewardEnsemble(
        env.spec.state_dim,
        env.spec.action_dim,
        n_members=config.ensemble_size,
        hidden=config.reward_hidden,
        hidden_layers=config.reward_layers,
        lr=config.reward_lr,
        seed=config.seed,
    )
    buffer = ReplayBuffer(env.spec.state_dim, env.spec.action_dim, config.buffer_capacity)
    teacher = ScriptedTeacher(config.equal_epsilon)
    ssl_cfg = config.ssl_config()
    aug_spec = config.augment_spec()

    labeled = LabeledDataset()
    heldout = []
    labels_used = 0
    reward_trained = False
    retained_fractions = []
    writer = MetricsWriter(metrics_path)

    def next_eval_seed():
        return eval_seq.spawn(1)[0]

    def do_eval(step):
        ret = evaluate(agent, eval_env, config.eval_episodes, next_eval_seed())
        writer.write(MetricsRecord(kind="eval", step=step, labels_used=labels_used,
                                   true_return=ret))
        status.update(step=step, labels_used=labels_used, latest_return=ret)
        return ret

    def sample_candidates(n):
        return [
            buffer.sample_segment_pair(config.segment_length, rng_cand, with_true_rewards=True)
            for _ in range(n)
        ]

    def pick_queries(n_query):
        plan = QueryPlan(
            initial_batch_size=config.candidate_factor * n_query,
            n_query=n_query,
            strategy=config.strategy,
        )
        candidates = sample_candidates(plan.initial_batch_size)
        return select_queries(candidates, plan, ensemble=ensemble, rng=rng_select)

    def train_and_relabel(step, session_labels):
        nonlocal reward_trained
        if config.ssl and len(labeled) > 0:
            count = (
                config.unlabeled_ratio * session_labels
                if config.unlabeled_ratio > 0
                else unlabeled_count(session_labels, config.budget)
            )
            unlabeled = buffer.extract_unlabeled(count, config.segment_length, rng_cand)
        else:
            unlabeled = UnlabeledDataset()
        stats = train_session(ensemble, labeled, unlabeled, ssl_cfg, aug_spec, rng_train)
        reward_trained = True
        buffer.relabel_all(ensemble)
        retained_fractions.append(stats.retained_fraction)
        acc = preference_accuracy(ensemble, heldout) if heldout else None
        writer.write(
            MetricsRecord(
                kind="session",
                step=step,
                labels_used=labels_used,
                heldout_accuracy=acc,
                retained_fraction=stats.retained_fraction,
                mean_loss=stats.mean_loss,
            )
        )

    def scripted_session(step):
        nonlocal labels_used
        n_query = min(config.queries_per_session, config.budget - labels_used)
        if n_query <= 0:
            return
        try:
            selected = pick_queries(n_query)
        except NotReadyError:
            return  # not enough stored episodes yet; retry next session
        triples = []
        for seg0, seg1 in selected:
            y = teacher.label(seg0, seg1)
            labels_used += 1
            triples.append(
                PreferenceTriple(seg0.strip_oracle(), seg1.strip_oracle(), y, "scripted")
            )
        n_held = min(int(round(config.heldout_fraction * len(triples))), len(triples) - 1)
        if n_held > 0:
            heldout.extend(triples[-n_held:])
            triples = triples[:-n_held]
        labeled.extend(triples)
        train_and_relabel(step, session_labels=n_query)

    def human_session(step):
        nonlocal labels_used
        answered = inbox.collect()
        labels_used += len(answered)
        labeled.extend(answered)
        inbox.drop_pending()  # session timeout for unanswered queries
        n_query = min(config.queries_per_session, config.budget - labels_used)
        if n_query > 0:
            try:
                selected = pick_queries(n_query)
                payloads = [
                    {
                        "env": config.env,
                        "segment_length": len(s0),
                        "left": envs.render_trajectory(env, s0),
                        "right": envs.render_trajectory(env, s1),
                    }
                    for s0, s1 in selected
                ]
                inbox.issue([(s0.strip_oracle(), s1.strip_oracle()) for s0, s1 in selected],
                            payloads)
            except NotReadyError:
                pass
        status.update(pending_queries=inbox.pending_count())
        if answered:
            train_and_relabel(step, session_labels=len(answered))

    # ---- phase 1: unsupervised pre-training --------------------------------
    pretrain(agent, env, buffer, config.pretrain_steps, rng_pre)

    # ---- phase 2: preference-guided training -------------------------------
    state = env.reset(rng_env)
    buffer.begin_episode()
    for step in range(config.total_steps):
        if step % config.feedback_frequency == 0:
            if config.teacher == "scripted":
                scripted_session(step)
            else:
                human_session(step)
            status.update(step=step, labels_used=labels_used)

        action = agent.act(state)
        next_state, true_reward, done = env.step(action)
        learned = ensemble.reward(state, action) if reward_trained else 0.0
        buffer.add(state, action, next_state, true_reward, done, learned_reward=learned)
        state = next_state
        if done:
            state = env.reset(rng_env)
            buffer.begin_episode()

        if buffer.size >= agent_cfg.batch_size:
            agent.update(buffer.sample_batch(agent_cfg.batch_size, rng_batch))

        if (step + 1) % config.eval_interval == 0:
            do_eval(step + 1)

    if config.total_steps % config.eval_interval != 0:
        do_eval(config.total_steps)
    final_return = next(
        (r.true_return for r in reversed(writer.records) if r.kind == "eval"), None
    )
    final_acc = next(
        (r.heldout_accuracy for r in reversed(writer.records)
         if r.kind == "session" and r.heldout_accuracy is not None),
        None,
    )
    writer.write(
        MetricsRecord(
            kind="final",
            step=config.total_steps,
            labels_used=labels_used,
            true_return=final_return,
            heldout_accuracy=final_acc,
            retained_fraction=(
                float(np.mean(retained_fractions)) if retained_fractions else None
            ),
        )
    )
    writer.close()
    status.update(step=config.total_steps, labels_used=labels_used, running=False)

    return RunResult(
        records=writer.records,
        labels_used=labels_used,
        final_return=final_return,
        heldout_accuracy=final_acc,
        mean_retained_fraction=(
            float(np.mean(retained_fractions)) if retained_fractions else None
        ),
        agent=agent,
        ensemble=ensemble,
        buffer=buffer,
        labeled=labeled,
        heldout=heldout,
    )


ABLATION_VARIANTS = {
    "baseline": dict(ssl=False, tda=False, ras=False, gn=False),
    "ssl": dict(ssl=True, tda=False, ras=False, gn=False),
    "tc": dict(ssl=False, tda=True, ras=False, gn=False),
    "ssl_tc": dict(ssl=True, tda=True, ras=False, gn=False),
    "ras": dict(ssl=False, tda=False, ras=True, gn=False),
    "gn": dict(ssl=False, tda=False, ras=False, gn=True),
}

SWEEP_GRIDS = {
    "mu": ("ssl_mu", [1, 2, 4, 7]),
    "tau": ("ssl_tau", [0.95, 0.97, 0.99, 0.999]),
    "lambda": ("ssl_lambda", [0.1, 0.5, 1.0, 2.0]),
}


def ablation_suite(base_config, seeds, variants=None, sweep=None):
    """Run the component ablation (or a hyperparameter sweep) across seeds.

    Returns one table row per variant with mean/std of the final true
    return, mean held-out accuracy, and (for SSL variants) the mean
    retained-unlabeled fraction.
    """
    if sweep is not None:
        if sweep not in SWEEP_GRIDS:
            raise ContractError(f"sweep must be one of {sorted(SWEEP_GRIDS)}")
        key, grid = SWEEP_GRIDS[sweep]
        variant_items = [
            (f"{sweep}={value}", {key: value, "ssl": True, "tda": True})
            for value in grid
        ]
    else:
        names = variants or list(ABLATION_VARIANTS)
        unknown = [n for n in names if n not in ABLATION_VARIANTS]
        if unknown:
            raise ContractError(f"unknown ablation variants {unknown}")
        variant_items = [(n, ABLATION_VARIANTS[n]) for n in names]

    rows = []
    for name, changes in variant_items:
        returns, accs, retained = [], [], []
        for i in range(seeds):
            cfg = base_config.replace(seed=base_config.seed + i, **changes)
            result = run(cfg)
            returns.append(result.final_return)
            if result.heldout_accuracy is not None:
                accs.append(result.heldout_accuracy)
            if result.mean_retained_fraction is not None:
                retained.append(result.mean_retained_fraction)
        uses_ssl = changes.get("ssl", False)
        rows.append(
            {
                "variant": name,
                "seeds": seeds,
                "return_mean": float(np.mean(returns)),
                "return_std": float(np.std(returns)),
                "heldout_accuracy": float(np.mean(accs)) if accs else None,
                "retained_fraction": float(np.mean(retained)) if uses_ssl and retained else None,
            }
        )
    return rows
