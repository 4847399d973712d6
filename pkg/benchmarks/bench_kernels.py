"""Benchmark the numba kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--rows 20000] [--features 30000]
       [--density 12] [--repeats 5]

Times one full forward/backward step (logits -> softmax -> xent grad) per
backend on a synthetic CSR batch and prints the speedup. Numba timings
exclude JIT compilation (a warmup call runs first).
"""

import argparse
import time

import numpy as np

from satdscan.classifier.kernels import available_backends, get_backend
from satdscan.labels import LABEL_ORDER


def synthetic_batch(rows, features, density, rng):
    lengths = rng.poisson(density, size=rows).clip(1, None)
    indptr = np.zeros(rows + 1, dtype=np.int64)
    indptr[1:] = np.cumsum(lengths)
    nnz = int(indptr[-1])
    indices = rng.integers(0, features, size=nnz).astype(np.int64)
    data = rng.integers(1, 4, size=nnz).astype(np.float64)
    labels = rng.integers(0, len(LABEL_ORDER), size=rows).astype(np.int64)
    weights = rng.normal(0.0, 0.05, size=(len(LABEL_ORDER), features + 1))
    return indptr, indices, data, labels, weights


def step(backend, indptr, indices, data, labels, weights, features):
    logits = backend.logits(indptr, indices, data, weights)
    probs = backend.softmax(logits)
    return backend.xent_grad(indptr, indices, data, probs, labels, features)


def bench(backend, args, payload):
    indptr, indices, data, labels, weights = payload
    step(backend, indptr, indices, data, labels, weights, args.features)  # warmup
    times = []
    for _ in range(args.repeats):
        t0 = time.perf_counter()
        step(backend, indptr, indices, data, labels, weights, args.features)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=20000)
    parser.add_argument("--features", type=int, default=30000)
    parser.add_argument("--density", type=int, default=12,
                        help="mean nonzeros per row")
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    payload = synthetic_batch(args.rows, args.features, args.density, rng)
    print(f"rows={args.rows} features={args.features} "
          f"nnz={int(payload[0][-1])} repeats={args.repeats}")

    results = {}
    for name in available_backends():
        backend = get_backend(name)
        best = bench(backend, args, payload)
        results[name] = best
        print(f"{name:>6}: {best * 1e3:8.2f} ms per step")

    if "numba" in results and "numpy" in results:
        loss_nb = step(get_backend("numba"), *payload, args.features)[0]
        loss_np = step(get_backend("numpy"), *payload, args.features)[0]
        print(f"speedup numba vs numpy: {results['numpy'] / results['numba']:.2f}x "
              f"(loss agreement {abs(loss_nb - loss_np):.2e})")


if __name__ == "__main__":
    main()
