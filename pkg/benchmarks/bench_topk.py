"""Benchmark batch top-k retrieval: numpy (BLAS) vs numba backends.

Usage:
    python3 benchmarks/bench_topk.py [--rows 200000] [--dim 768]
                                     [--queries 256] [--k 5]
"""

import argparse
import os
import time

import numpy as np

from snolink import _kernels
from snolink.store import EmbeddingStore, top_k_batch


def run_backend(backend, store, queries, k, repeats=3):
    os.environ[_kernels.ENV_VAR] = backend
    _kernels.warmup()
    top_k_batch(store, queries[:4], k)  # warm caches / JIT
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        top_k_batch(store, queries, k)
        best = min(best, time.perf_counter() - start)
    return len(queries) / best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=200_000)
    parser.add_argument("--dim", type=int, default=768)
    parser.add_argument("--queries", type=int, default=256)
    parser.add_argument("--k", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    print(f"building store: {args.rows} x {args.dim} float32")
    vectors = rng.standard_normal((args.rows, args.dim)).astype(np.float32)
    ids = [f"c{i:07d}" for i in range(args.rows)]
    store = EmbeddingStore(ids=ids, vectors=vectors)._normalized()
    queries = rng.standard_normal((args.queries, args.dim))

    backends = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])
    for backend in backends:
        qps = run_backend(backend, store, queries, args.k)
        print(f"{backend:>6}: {qps:8.1f} queries/s (batch {args.queries}, top-{args.k})")
    os.environ.pop(_kernels.ENV_VAR, None)


if __name__ == "__main__":
    main()
