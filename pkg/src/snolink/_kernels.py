"""Score kernels for dense retrieval.

Two interchangeable backends compute query-vs-store dot products in
float32 (callers re-score boundary candidates in float64, so final
scores and ordering are backend-independent):

* ``numpy`` (default): BLAS sgemm/sgemv, the fastest option for this
  dense GEMM-shaped workload.
* ``numba``: parallel JIT loops, useful where a tuned BLAS is absent or
  pinned to one thread.

Set ``SNOLINK_BACKEND=numpy`` or ``numba`` to force a backend. The
variable is read on every call so benchmarks can flip it in-process.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

ENV_VAR = "SNOLINK_BACKEND"


def backend_name() -> str:
    forced = os.environ.get(ENV_VAR, "").strip().lower()
    if forced in ("numpy", "numba"):
        if forced == "numba" and not HAVE_NUMBA:
            raise RuntimeError("SNOLINK_BACKEND=numba but numba is not importable")
        return forced
    return "numpy"


if HAVE_NUMBA:

    @njit(parallel=True, fastmath=True, cache=True)
    def _scores_numba(vectors, query):
        n = vectors.shape[0]
        dim = vectors.shape[1]
        out = np.empty(n, dtype=np.float32)
        for i in prange(n):
            acc = np.float32(0.0)
            for t in range(dim):
                acc += vectors[i, t] * query[t]
            out[i] = acc
        return out

    @njit(parallel=True, fastmath=True, cache=True)
    def _scores_batch_numba(vectors, queries_t):
        # queries_t is (dim, m); accumulating along the contiguous query
        # axis keeps the inner loop vectorizable.
        n = vectors.shape[0]
        dim = vectors.shape[1]
        m = queries_t.shape[1]
        out = np.zeros((n, m), dtype=np.float32)
        for i in prange(n):
            row = out[i]
            for t in range(dim):
                v = vectors[i, t]
                for q in range(m):
                    row[q] += v * queries_t[t, q]
        return out


def scores(vectors: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Dot products of every store row against one query vector."""
    q32 = np.ascontiguousarray(query, dtype=np.float32)
    if backend_name() == "numba":
        return _scores_numba(vectors, q32)
    return vectors @ q32


def scores_batch(vectors: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Dot products for a batch of queries; shape (n_queries, n_rows)."""
    q32 = np.ascontiguousarray(queries, dtype=np.float32)
    if backend_name() == "numba":
        return _scores_batch_numba(vectors, np.ascontiguousarray(q32.T)).T
    return q32 @ vectors.T


def warmup() -> None:
    """Trigger JIT compilation so timed runs measure steady state."""
    if HAVE_NUMBA and backend_name() == "numba":
        v = np.ones((2, 3), dtype=np.float32)
        _scores_numba(v, np.ones(3, dtype=np.float32))
        _scores_batch_numba(v, np.ones((3, 2), dtype=np.float32))
