"""Compare the compiled kernel core against the NumPy fallback.

Times the hot paths: batch-invariant inference matmul, fused elementwise
and Adam kernels, pairwise distances for the entropy estimator, and a full
tape-based MLP train step.  Run after building the extension:

    python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from prefrl.ndmath import backend
from prefrl import ndmath as nd


def timeit(fn, repeats, warmup=3):
    for _ in range(warmup):
        fn()
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def bench_backend(K, repeats):
    rng = np.random.default_rng(0)
    results = {}

    a = rng.standard_normal((4096, 70))
    b = rng.standard_normal((70, 256))
    results["matmul_stable 4096x70x256"] = timeit(lambda: K.matmul_stable(a, b), repeats)
    results["matmul (BLAS) 4096x70x256"] = timeit(lambda: K.matmul(a, b), repeats)

    x = rng.standard_normal((512, 256))
    results["tanh 512x256"] = timeit(lambda: K.tanh(x), repeats)
    results["leaky_relu 512x256"] = timeit(lambda: K.leaky_relu(x, 0.01), repeats)
    results["logistic 512x256"] = timeit(lambda: K.logistic(x), repeats)

    p = rng.standard_normal(70_000)
    g = rng.standard_normal(70_000)
    m = np.zeros(70_000)
    v = np.zeros(70_000)
    results["adam_step 70k params"] = timeit(
        lambda: K.adam_step(p, g, m, v, 10, 3e-4, 0.9, 0.999, 1e-8), repeats
    )

    s = rng.standard_normal((512, 4))
    results["pairwise_sq_dists 512x4"] = timeit(lambda: K.pairwise_sq_dists(s), repeats)
    return results


def bench_train_step(repeats):
    """Tape forward/backward/Adam on a reward-model-sized MLP."""
    rng = np.random.default_rng(1)
    pset = nd.ParamSet()
    mlp = nd.Mlp(pset, "net", [70, 256, 256, 256, 1], rng, out_tanh=True)
    x = rng.standard_normal((512, 70))

    def step():
        with nd.Tape() as tape:
            out = mlp(nd.Tensor(x))
            loss = nd.tmean(nd.mul(out, out))
        nd.adam_step(pset, tape.gradients(loss), lr=3e-4)

    return timeit(step, repeats, warmup=2)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    backends = backend.available()
    print(f"backends available: {', '.join(backends)}")
    rows = {}
    for name in backends:
        backend.use(name)
        rows[name] = bench_backend(backend.kernels, args.repeats)
        rows[name]["mlp train step 512x(70-256^3-1)"] = bench_train_step(args.repeats)
    backend.use("compiled" if "compiled" in backends else "numpy")

    keys = list(next(iter(rows.values())))
    width = max(len(k) for k in keys) + 2
    header = f"{'kernel'.ljust(width)}" + "".join(f"{n:>14}" for n in rows)
    if len(rows) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for key in keys:
        line = key.ljust(width)
        for name in rows:
            line += f"{rows[name][key] * 1e3:>12.3f}ms"
        if len(rows) == 2:
            line += f"{rows['numpy'][key] / rows['compiled'][key]:>9.2f}x"
        print(line)


if __name__ == "__main__":
    main()
