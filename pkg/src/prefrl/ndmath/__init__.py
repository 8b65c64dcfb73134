"""Minimal dense-tensor math with reverse-mode autodiff and Adam.

The numerical kernels come from a compiled Cython core when built, with a
NumPy fallback selected at import time (see :mod:`prefrl.ndmath.backend`).
"""

from . import backend
from .nn import Affine, Mlp, ParamSet, fan_in_uniform
from .optim import adam_step, ema_update
from .tensor import (
    Grads,
    Tape,
    Tensor,
    add,
    clamp,
    concat_cols,
    div,
    exp,
    leaky_relu,
    log,
    logistic,
    matmul,
    minimum,
    mul,
    neg,
    reshape,
    segment_sums,
    set_debug_checks,
    slice1d,
    softplus,
    sub,
    tanh,
    tmean,
    tsum,
)

__all__ = [
    "Affine",
    "Grads",
    "Mlp",
    "ParamSet",
    "Tape",
    "Tensor",
    "adam_step",
    "add",
    "backend",
    "clamp",
    "concat_cols",
    "div",
    "ema_update",
    "exp",
    "fan_in_uniform",
    "leaky_relu",
    "log",
    "logistic",
    "matmul",
    "minimum",
    "mul",
    "neg",
    "reshape",
    "segment_sums",
    "set_debug_checks",
    "slice1d",
    "softplus",
    "sub",
    "tanh",
    "tmean",
    "tsum",
]
