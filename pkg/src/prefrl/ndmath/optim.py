"""Adam updates and target-network EMA tracking."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError
from . import backend

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def adam_step(pset, grads, lr, beta1=ADAM_BETA1, beta2=ADAM_BETA2, eps=ADAM_EPS):
    """One Adam step over every parameter in the set.

    Parameters without a recorded gradient are stepped with g = 0 (their
    moments decay), so the step counter stays meaningful for the whole set.
    """
    K = backend.kernels
    pset.step_count += 1
    t = pset.step_count
    for name, p in pset.items():
        g = grads.get(p)
        if g is None:
            g = np.zeros_like(p.data)
        elif g.shape != p.data.shape:
            raise DimensionError(
                f"gradient shape {g.shape} != parameter shape {p.data.shape} for {name}"
            )
        m, v = pset.moments(name)
        K.adam_step(p.data, np.ascontiguousarray(g), m, v, t, lr, beta1, beta2, eps)


def ema_update(target_pset, online_pset, tau):
    """target <- (1 - tau) * target + tau * online, in place."""
    for name, tp in target_pset.items():
        tp.data *= 1.0 - tau
        tp.data += tau * online_pset[name].data
