"""Candidate list reranking over a second embedding space.

The reranker rescores each first-stage candidate by cosine similarity in
a dedicated rerank space (two stores: mention-side and concept-side) and
re-sorts. When a key is missing from either store the original list is
passed through untouched and the reason reported, so one bad mention
never fails a whole batch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .store import Candidate, EmbeddingStore

MODE_PASSTHROUGH = "passthrough"
MODE_EMBEDDING = "embedding"


@dataclass
class RerankConfig:
    k: int = 5
    mode: str = MODE_PASSTHROUGH

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("rerank k must be >= 1")
        if self.mode not in (MODE_PASSTHROUGH, MODE_EMBEDDING):
            raise ValueError(f"unknown rerank mode {self.mode!r}")


def rerank(
    candidates: Sequence[Candidate],
    mention_key: str,
    query_store: EmbeddingStore,
    doc_store: EmbeddingStore,
) -> tuple[list[Candidate], Optional[str]]:
    """Rescore candidates in the rerank space and re-sort descending.

    Ties on the rerank score keep the original first-stage order. Returns
    (candidates, fallback_reason); the reason is None when reranking was
    applied, else the list is the untouched input.
    """
    mention_vec = query_store.vector(mention_key)
    if mention_vec is None:
        return list(candidates), f"mention key {mention_key!r} not in rerank query store"
    missing = [c.concept_id for c in candidates if c.concept_id not in doc_store]
    if missing:
        return list(candidates), f"candidate id(s) not in rerank doc store: {', '.join(missing)}"

    mention64 = mention_vec.astype(np.float64)
    rescored = []
    for cand in candidates:
        doc64 = doc_store.vector(cand.concept_id).astype(np.float64)
        rescored.append(Candidate(cand.concept_id, float(mention64 @ doc64)))
    # Stable sort: equal rerank scores preserve first-stage rank.
    rescored.sort(key=lambda c: -c.score)
    return rescored, None
