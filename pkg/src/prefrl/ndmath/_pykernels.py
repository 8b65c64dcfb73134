"""NumPy implementations of the numerical kernels.

This is the fallback backend used when the compiled extension is not
available.  Semantics must match ``_ckernels.pyx`` exactly; in particular
``matmul_stable`` must produce per-row results that do not depend on the
number of rows in the batch or on the row position (BLAS ``@`` does not
satisfy this, ``einsum`` with ``optimize=False`` does).
"""

import numpy as np

NAME = "numpy"


def matmul(a, b):
    return a @ b


def matmul_stable(a, b):
    # Fixed accumulation order per output element, independent of batch size.
    return np.einsum("ij,jk->ik", a, b, optimize=False)


def bias_add(x, b):
    return x + b


def bias_grad(g):
    return g.sum(axis=0)


def leaky_relu(x, slope):
    return np.where(x > 0.0, x, slope * x)


def leaky_relu_grad(x, g, slope):
    return g * np.where(x > 0.0, 1.0, slope)


# Largest double strictly below 1; tanh saturates to +-1.0 exactly beyond
# |x| ~ 19.07, which would violate the open-interval output bound.
_TANH_LIM = np.nextafter(1.0, 0.0)


def tanh(x):
    return np.clip(np.tanh(x), -_TANH_LIM, _TANH_LIM)


def tanh_grad(out, g):
    return g * (1.0 - out * out)


def logistic(x):
    # Stable split form: never exponentiates a large positive argument.
    out = np.empty_like(x)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def logistic_grad(out, g):
    return g * out * (1.0 - out)


def softplus(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def softplus_grad(x, g):
    return g * logistic(x)


def adam_step(p, g, m, v, t, lr, beta1, beta2, eps):
    """In-place Adam update with bias correction."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    mhat = m / (1.0 - beta1**t)
    vhat = v / (1.0 - beta2**t)
    p -= lr * mhat / (np.sqrt(vhat) + eps)


def pairwise_sq_dists(x):
    """All-pairs squared Euclidean distances, computed as explicit
    coordinate differences (not the expanded dot-product form) so results
    match a brute-force oracle bit for bit at low dimension."""
    diff = x[:, None, :] - x[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff, optimize=False)
