"""Parameter containers and small MLPs built on the tensor ops."""

from __future__ import annotations

import numpy as np

from ..errors import ContractError, DimensionError
from . import backend
from .tensor import Tensor, add, leaky_relu, matmul, tanh


class ParamSet:
    """Named parameter tensors plus their Adam state.

    One step counter per set: every optimizer step advances all moments
    together, which keeps bias correction consistent across parameters.
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name, values):
        if name in self._params:
            raise ContractError(f"duplicate parameter name {name!r}")
        t = Tensor(np.ascontiguousarray(values, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        self._m[name] = np.zeros_like(t.data)
        self._v[name] = np.zeros_like(t.data)
        return t

    def __getitem__(self, name):
        return self._params[name]

    def __iter__(self):
        return iter(self._params)

    def __len__(self):
        return len(self._params)

    def items(self):
        return self._params.items()

    def moments(self, name):
        return self._m[name], self._v[name]

    def state_dict(self):
        out = {"step_count": np.asarray(self.step_count)}
        for name, t in self._params.items():
            out[f"p/{name}"] = t.data.copy()
            out[f"m/{name}"] = self._m[name].copy()
            out[f"v/{name}"] = self._v[name].copy()
        return out

    def load_state_dict(self, state):
        self.step_count = int(state["step_count"])
        for name, t in self._params.items():
            for prefix, dest in (("p", t.data), ("m", self._m[name]), ("v", self._v[name])):
                src = np.asarray(state[f"{prefix}/{name}"])
                if src.shape != dest.shape:
                    raise DimensionError(
                        f"checkpoint shape {src.shape} != {dest.shape} for {name}"
                    )
                dest[...] = src

    def copy_values_from(self, other):
        """Overwrite parameter values (not optimizer state) from another set."""
        for name, t in self._params.items():
            t.data[...] = other[name].data


def fan_in_uniform(rng, fan_in, shape):
    """Uniform init in +-sqrt(1/fan_in)."""
    lim = np.sqrt(1.0 / fan_in)
    return rng.uniform(-lim, lim, size=shape)


class Affine:
    """y = x W + b with fan-in uniform init."""

    def __init__(self, pset, name, din, dout, rng):
        self.W = pset.add(f"{name}.W", fan_in_uniform(rng, din, (din, dout)))
        self.b = pset.add(f"{name}.b", fan_in_uniform(rng, din, (dout,)))

    def __call__(self, x):
        return add(matmul(x, self.W), self.b)

    def apply(self, x, stable=False):
        """ndarray forward without tape; `stable` selects the batch-size
        invariant matmul kernel."""
        K = backend.kernels
        mm = K.matmul_stable if stable else K.matmul
        return K.bias_add(mm(x, self.W.data), self.b.data)


class Mlp:
    """Fully connected stack: leaky-ReLU hidden layers, optional tanh output."""

    def __init__(self, pset, name, sizes, rng, slope=0.01, out_tanh=False):
        if len(sizes) < 2:
            raise ContractError("Mlp needs at least input and output sizes")
        self.slope = slope
        self.out_tanh = out_tanh
        self.layers = [
            Affine(pset, f"{name}.{i}", sizes[i], sizes[i + 1], rng)
            for i in range(len(sizes) - 1)
        ]

    def __call__(self, x):
        h = x if isinstance(x, Tensor) else Tensor(x)
        for layer in self.layers[:-1]:
            h = leaky_relu(layer(h), self.slope)
        out = self.layers[-1](h)
        return tanh(out) if self.out_tanh else out

    def apply(self, x, stable=False):
        K = backend.kernels
        h = np.ascontiguousarray(x, dtype=np.float64)
        for layer in self.layers[:-1]:
            h = K.leaky_relu(layer.apply(h, stable=stable), self.slope)
        out = self.layers[-1].apply(h, stable=stable)
        return K.tanh(out) if self.out_tanh else out
