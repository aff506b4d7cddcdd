"""Binary embedding store and exact top-k cosine retrieval.

Store file format (SNOEMB01), all integers little-endian:

    magic   8 bytes  b"SNOEMB01"
    dim     u32
    count   u64
    count records of:
        id_len  u16
        id      id_len bytes, UTF-8
        vector  dim float32 (IEEE-754)

Rows are L2-normalized at load so retrieval reduces to dot products;
files always hold the raw (possibly unnormalized) vectors.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _kernels

MAGIC = b"SNOEMB01"
_NORM_TOL = 1e-5
# Float32 scoring can misplace candidates this close to the k-th score;
# everything inside the margin is re-scored in float64 before the final
# ordering. 1e-3 comfortably covers worst-case f32 accumulation error at
# dim 768.
_BOUNDARY_MARGIN = 1e-3


class StoreError(Exception):
    pass


@dataclass(frozen=True)
class Candidate:
    concept_id: str
    score: float


def cosine(a, b) -> float:
    """Cosine similarity of two vectors, computed in float64."""
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if av.shape != bv.shape or av.ndim != 1:
        raise ValueError(f"dimension mismatch: {av.shape} vs {bv.shape}")
    na = np.linalg.norm(av)
    nb = np.linalg.norm(bv)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine undefined for zero vector")
    return float(np.dot(av, bv) / (na * nb))


def _row_norms(vectors: np.ndarray, chunk: int = 16384) -> np.ndarray:
    norms = np.empty(vectors.shape[0], dtype=np.float64)
    for lo in range(0, vectors.shape[0], chunk):
        block = vectors[lo : lo + chunk].astype(np.float64)
        norms[lo : lo + chunk] = np.sqrt((block * block).sum(axis=1))
    return norms


@dataclass
class EmbeddingStore:
    """Unit-normalized row-major float32 matrix keyed by string ids."""

    ids: list[str]
    vectors: np.ndarray
    rescaled_count: int = 0
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if len(self.ids) != self.vectors.shape[0]:
            raise StoreError("row count does not match id count")
        if not self._index:
            self._index = {cid: i for i, cid in enumerate(self.ids)}
        if len(self._index) != len(self.ids):
            raise StoreError("duplicate ids in store")

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, key: str) -> bool:
        return key in self._index

    def vector(self, key: str) -> Optional[np.ndarray]:
        idx = self._index.get(key)
        return None if idx is None else self.vectors[idx]

    def subset(self, keys: Iterable[str]) -> "EmbeddingStore":
        """Contiguous sub-store over the given ids (which must exist)."""
        rows = [self._index[k] for k in keys]
        return EmbeddingStore(
            ids=[self.ids[i] for i in rows],
            vectors=np.ascontiguousarray(self.vectors[rows]),
        )

    @classmethod
    def from_records(
        cls, records: Sequence[tuple[str, np.ndarray]]
    ) -> "EmbeddingStore":
        ids = [rid for rid, _ in records]
        if len(set(ids)) != len(ids):
            raise StoreError("duplicate ids")
        if not records:
            return cls(ids=[], vectors=np.zeros((0, 0), dtype=np.float32))
        vectors = np.ascontiguousarray(
            [np.asarray(v, dtype=np.float32) for _, v in records]
        )
        return cls(ids=ids, vectors=vectors)._normalized()

    def _normalized(self) -> "EmbeddingStore":
        """Rescale rows to unit norm in place; count the rows touched."""
        if self.vectors.size == 0:
            return self
        norms = _row_norms(self.vectors)
        if np.any(norms == 0.0):
            bad = int(np.flatnonzero(norms == 0.0)[0])
            raise StoreError(f"zero vector for id {self.ids[bad]}")
        # Every row is divided by its norm; only rows that were off by
        # more than the tolerance count as rescaled.
        self.rescaled_count = int((np.abs(norms - 1.0) > _NORM_TOL).sum())
        self.vectors /= norms[:, None].astype(np.float32)
        return self


def write_store(records: Sequence[tuple[str, np.ndarray]], path) -> None:
    """Serialize raw (id, vector) records; does not normalize."""
    seen: set[str] = set()
    dim: Optional[int] = None
    with open(path, "wb") as fh:
        payload = []
        for rid, vec in records:
            arr = np.asarray(vec, dtype=np.float32)
            if arr.ndim != 1:
                raise StoreError(f"vector for {rid} is not one-dimensional")
            if dim is None:
                dim = arr.shape[0]
            elif arr.shape[0] != dim:
                raise StoreError(f"inconsistent dimension for id {rid}")
            if rid in seen:
                raise StoreError(f"duplicate id {rid}")
            seen.add(rid)
            payload.append((rid.encode("utf-8"), arr))
        if dim is None:
            dim = 0
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", dim, len(payload)))
        for rid_bytes, arr in payload:
            fh.write(struct.pack("<H", len(rid_bytes)))
            fh.write(rid_bytes)
            fh.write(arr.astype("<f4").tobytes())


def load_store(path) -> EmbeddingStore:
    """Read a SNOEMB01 file; rows are unit-normalized after load."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise StoreError(f"{path}: bad magic {magic!r}")
        header = fh.read(12)
        if len(header) != 12:
            raise StoreError(f"{path}: truncated header")
        dim, count = struct.unpack("<IQ", header)
        ids: list[str] = []
        vectors = np.empty((count, dim), dtype=np.float32)
        row_bytes = 4 * dim
        for i in range(count):
            len_raw = fh.read(2)
            if len(len_raw) != 2:
                raise StoreError(f"{path}: truncated at record {i}")
            (id_len,) = struct.unpack("<H", len_raw)
            id_raw = fh.read(id_len)
            vec_raw = fh.read(row_bytes)
            if len(id_raw) != id_len or len(vec_raw) != row_bytes:
                raise StoreError(f"{path}: truncated at record {i}")
            ids.append(id_raw.decode("utf-8"))
            vectors[i] = np.frombuffer(vec_raw, dtype="<f4")
        if fh.read(1):
            raise StoreError(f"{path}: trailing bytes after {count} records")
    return EmbeddingStore(ids=ids, vectors=vectors)._normalized()


def _normalize_query(query) -> np.ndarray:
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1:
        raise ValueError("query must be one-dimensional")
    norm = np.linalg.norm(q)
    if norm == 0.0:
        raise ValueError("zero query vector")
    return q / norm


def _select(store: EmbeddingStore, raw_scores: np.ndarray, q64: np.ndarray, k: int) -> list[Candidate]:
    n = len(store)
    k_eff = min(k, n)
    if k_eff == 0:
        return []
    kth = np.partition(raw_scores, n - k_eff)[n - k_eff]
    cand = np.flatnonzero(raw_scores >= kth - _BOUNDARY_MARGIN)
    exact = store.vectors[cand].astype(np.float64) @ q64
    order = sorted(
        range(len(cand)), key=lambda i: (-exact[i], store.ids[cand[i]])
    )[:k_eff]
    return [Candidate(store.ids[cand[i]], float(exact[i])) for i in order]


def top_k(store: EmbeddingStore, query, k: int) -> list[Candidate]:
    """Exact top-k by cosine, descending; score ties broken by smaller id.

    Scores equal cosine(query, row) over the normalized store: the bulk
    pass may run in float32, but every returned (and boundary) candidate
    is re-scored in float64.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    q64 = _normalize_query(query)
    if len(store) == 0:
        return []
    if q64.shape[0] != store.dim:
        raise ValueError(f"query dim {q64.shape[0]} != store dim {store.dim}")
    raw = _kernels.scores(store.vectors, q64)
    return _select(store, raw, q64, k)


def top_k_batch(store: EmbeddingStore, queries, k: int) -> list[list[Candidate]]:
    """top_k for a batch of queries; within-query order is never reordered."""
    if k < 1:
        raise ValueError("k must be >= 1")
    qs = np.asarray(queries, dtype=np.float64)
    if qs.ndim != 2:
        raise ValueError("queries must be a 2-d array")
    if len(store) == 0:
        return [[] for _ in range(qs.shape[0])]
    if qs.shape[1] != store.dim:
        raise ValueError(f"query dim {qs.shape[1]} != store dim {store.dim}")
    norms = np.linalg.norm(qs, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("zero query vector in batch")
    qs = qs / norms[:, None]
    raw = _kernels.scores_batch(store.vectors, qs)
    return [_select(store, raw[i], qs[i], k) for i in range(qs.shape[0])]
