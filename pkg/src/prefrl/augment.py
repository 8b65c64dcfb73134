"""Segment augmentations for reward learning.

Temporal cropping draws one shared crop length per pair (the preference is
defined on accumulated reward, so compared segments must stay equally
long) with independent start offsets.  Amplitude scaling and Gaussian
noise perturb states only, consistently along the time dimension, and
leave actions bit-identical; both serve as ablation baselines.
None of these touch preference labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import Segment
from .errors import ContractError

AUGMENT_KINDS = ("none", "crop", "ras", "gn")


@dataclass(frozen=True)
class CropConfig:
    h_min: int = 45
    h_max: int = 55
    base_length: int = 60

    def __post_init__(self):
        if not 1 <= self.h_min <= self.h_max <= self.base_length:
            raise ContractError(
                f"need 1 <= h_min <= h_max <= base_length, got "
                f"[{self.h_min}, {self.h_max}] with base {self.base_length}"
            )


@dataclass(frozen=True)
class RasConfig:
    alpha: float = 0.8
    beta: float = 1.2

    def __post_init__(self):
        if not 0.0 < self.alpha <= self.beta:
            raise ContractError(f"need 0 < alpha <= beta, got [{self.alpha}, {self.beta}]")


@dataclass(frozen=True)
class GnConfig:
    sigma: float = 1.0
    per_step: bool = False  # ablation harness variant: one draw per step

    def __post_init__(self):
        if self.sigma < 0.0:
            raise ContractError(f"sigma must be >= 0, got {self.sigma}")


def _crop(seg, start, length):
    return Segment(
        states=seg.states[start : start + length].copy(),
        actions=seg.actions[start : start + length].copy(),
        episode_id=seg.episode_id,
        start=seg.start + start,
        true_rewards=None
        if seg.true_rewards is None
        else seg.true_rewards[start : start + length].copy(),
    )


def tda(seg0, seg1, cfg, rng):
    """Temporal crop of a segment pair: shared length H' drawn uniformly
    from [h_min, h_max], start offsets drawn independently from [0, H-H']."""
    if len(seg0) != cfg.base_length or len(seg1) != cfg.base_length:
        raise ContractError(
            f"temporal crop expects segments of length {cfg.base_length}, "
            f"got {len(seg0)} and {len(seg1)}"
        )
    length = int(rng.integers(cfg.h_min, cfg.h_max + 1))
    k0 = int(rng.integers(0, cfg.base_length - length + 1))
    k1 = int(rng.integers(0, cfg.base_length - length + 1))
    return _crop(seg0, k0, length), _crop(seg1, k1, length)


def ras(seg, cfg, rng):
    """Scale every state by one z ~ Unif[alpha, beta]; actions unchanged."""
    z = float(rng.uniform(cfg.alpha, cfg.beta))
    return Segment(
        states=seg.states * z,
        actions=seg.actions.copy(),
        episode_id=seg.episode_id,
        start=seg.start,
    )


def gn(seg, cfg, rng):
    """Add Gaussian noise to every state; actions unchanged.

    Default: one z ~ N(0, sigma^2 I) per segment, applied at every step.
    With ``per_step`` each step gets its own draw.
    """
    dim = seg.states.shape[1]
    if cfg.per_step:
        z = rng.normal(0.0, cfg.sigma, size=seg.states.shape)
    else:
        z = rng.normal(0.0, cfg.sigma, size=dim)
    return Segment(
        states=seg.states + z,
        actions=seg.actions.copy(),
        episode_id=seg.episode_id,
        start=seg.start,
    )


@dataclass(frozen=True)
class AugmentSpec:
    """Which augmentation a trainer applies to each sampled pair."""

    kind: str = "crop"
    crop: CropConfig = field(default_factory=CropConfig)
    ras: RasConfig = field(default_factory=RasConfig)
    gn: GnConfig = field(default_factory=GnConfig)

    def __post_init__(self):
        if self.kind not in AUGMENT_KINDS:
            raise ContractError(f"kind must be one of {AUGMENT_KINDS}, got {self.kind!r}")


def augment_pair(seg0, seg1, spec, rng):
    """Apply the configured augmentation to one pair (labels untouched)."""
    if spec.kind == "none":
        return seg0, seg1
    if spec.kind == "crop":
        return tda(seg0, seg1, spec.crop, rng)
    if spec.kind == "ras":
        return ras(seg0, spec.ras, rng), ras(seg1, spec.ras, rng)
    return gn(seg0, spec.gn, rng), gn(seg1, spec.gn, rng)
