"""Experiment configuration: one flat record, readable from a key=value file.

The file format is line-oriented: ``key = value``, ``#`` comments, blank
lines ignored.  Keys are exactly the field names below; booleans accept
on/off/true/false/1/0.  CLI flags override file values.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .agent import AgentConfig
from .augment import AugmentSpec, CropConfig, GnConfig, RasConfig
from .errors import ContractError
from .reward import SslConfig

TEACHERS = ("scripted", "human")
STRATEGIES = ("uniform", "disagreement")


@dataclass(frozen=True)
class ExperimentConfig:
    # task / schedule
    env: str = "point_mass_reach"
    seed: int = 1
    total_steps: int = 100_000
    feedback_frequency: int = 2_000
    queries_per_session: int = 10
    budget: int = 100
    teacher: str = "scripted"
    strategy: str = "disagreement"
    candidate_factor: int = 10  # candidate batch = factor * queries_per_session
    equal_epsilon: float = 0.0
    heldout_fraction: float = 0.2

    # ablation switches
    ssl: bool = True
    tda: bool = True
    ras: bool = False
    gn: bool = False

    # semi-supervised reward learning
    ssl_mu: int = 4
    ssl_tau: float = 0.99
    ssl_lambda: float = 1.0
    reward_batch_size: int = 32
    reward_epochs: int = 40
    reward_hidden: int = 256
    reward_layers: int = 3
    ensemble_size: int = 3
    reward_lr: float = 0.0003
    unlabeled_ratio: int = 0  # 0 = auto: 10x for budgets >= 1000, else 100x

    # segments / augmentation
    segment_length: int = 60
    crop_min: int = 45
    crop_max: int = 55
    ras_alpha: float = 0.8
    ras_beta: float = 1.2
    gn_sigma: float = 1.0

    # agent
    agent_hidden: int = 64
    agent_batch_size: int = 128
    gamma: float = 0.99
    temperature: float = 0.1
    auto_temperature: bool = False
    agent_lr: float = 0.0003
    tau_ema: float = 0.005
    target_update_freq: int = 2
    pretrain_steps: int = 2_000
    knn_k: int = 5
    init_random_steps: int = 200

    # infrastructure
    buffer_capacity: int = 100_000
    eval_interval: int = 2_000
    eval_episodes: int = 3
    out_dir: str = ""

    def validate(self):
        if self.teacher not in TEACHERS:
            raise ContractError(f"teacher must be one of {TEACHERS}")
        if self.strategy not in STRATEGIES:
            raise ContractError(f"strategy must be one of {STRATEGIES}")
        if self.total_steps < 1 or self.feedback_frequency < 1:
            raise ContractError("total_steps and feedback_frequency must be positive")
        if self.queries_per_session < 1 or self.candidate_factor < 1:
            raise ContractError("queries_per_session and candidate_factor must be positive")
        if self.budget < 0:
            raise ContractError("budget must be >= 0")
        # sessions run at steps 0, f, 2f, ... strictly below total_steps
        sessions = -(-self.total_steps // self.feedback_frequency)
        if self.budget > sessions * self.queries_per_session:
            raise ContractError(
                f"budget {self.budget} unreachable: at most {sessions} sessions x "
                f"{self.queries_per_session} queries fit in {self.total_steps} steps"
            )
        if sum((self.tda, self.ras, self.gn)) > 1:
            raise ContractError("choose at most one augmentation (tda / ras / gn)")
        if not 0.0 <= self.heldout_fraction < 1.0:
            raise ContractError("heldout_fraction must be in [0, 1)")
        # constructing the sub-configs runs their own validation
        self.ssl_config()
        self.augment_spec()
        self.agent_config()
        return self

    # -- derived views ------------------------------------------------------

    def ssl_config(self):
        return SslConfig(
            mu=self.ssl_mu if self.ssl else 0,
            tau=self.ssl_tau,
            lam=self.ssl_lambda if self.ssl else 0.0,
            batch_size=self.reward_batch_size,
            epochs=self.reward_epochs,
        )

    def augment_spec(self):
        if self.tda:
            kind = "crop"
        elif self.ras:
            kind = "ras"
        elif self.gn:
            kind = "gn"
        else:
            kind = "none"
        return AugmentSpec(
            kind=kind,
            crop=CropConfig(self.crop_min, self.crop_max, self.segment_length),
            ras=RasConfig(self.ras_alpha, self.ras_beta),
            gn=GnConfig(self.gn_sigma),
        )

    def agent_config(self):
        return AgentConfig(
            hidden=self.agent_hidden,
            gamma=self.gamma,
            temperature=self.temperature,
            auto_temperature=self.auto_temperature,
            lr=self.agent_lr,
            batch_size=self.agent_batch_size,
            tau_ema=self.tau_ema,
            target_update_freq=self.target_update_freq,
            pretrain_steps=self.pretrain_steps,
            knn_k=self.knn_k,
            init_random_steps=self.init_random_steps,
        )

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    # -- file I/O -------------------------------------------------------------

    def to_file(self, path):
        lines = [f"{f.name} = {_fmt(getattr(self, f.name))}" for f in dataclasses.fields(self)]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_file(cls, path, overrides=None):
        values = {}
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ContractError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
        if overrides:
            values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_strings(values)

    @classmethod
    def from_strings(cls, values):
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in values.items():
            if key not in fields:
                raise ContractError(f"unknown config key {key!r}")
            kwargs[key] = _parse(value, fields[key].type, key)
        return cls(**kwargs)


def _fmt(value):
    if isinstance(value, bool):
        return "on" if value else "off"
    return str(value)


def _parse(value, annotation, key):
    if not isinstance(value, str):
        return value
    if annotation == "bool":
        lowered = value.lower()
        if lowered in ("on", "true", "1", "yes"):
            return True
        if lowered in ("off", "false", "0", "no"):
            return False
        raise ContractError(f"config key {key!r}: expected on/off, got {value!r}")
    if annotation == "int":
        return int(value)
    if annotation == "float":
        return float(value)
    return value
