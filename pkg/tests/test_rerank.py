import numpy as np
import pytest

from snolink.rerank import MODE_EMBEDDING, MODE_PASSTHROUGH, RerankConfig, rerank
from snolink.store import Candidate, EmbeddingStore


def store_of(mapping):
    return EmbeddingStore.from_records(
        [(key, np.asarray(vec, dtype=np.float32)) for key, vec in mapping.items()]
    )


QUERY_STORE = store_of({"chest pain": [1.0, 0.0, 0.0]})


class TestRerankConfig:
    def test_defaults(self):
        cfg = RerankConfig()
        assert cfg.k == 5
        assert cfg.mode == MODE_PASSTHROUGH

    def test_rejects_bad_k(self):
        with pytest.raises(ValueError):
            RerankConfig(k=0)

    def test_rejects_bad_mode(self):
        with pytest.raises(ValueError):
            RerankConfig(mode="cross-encoder")


class TestRerank:
    def test_order_swaps_on_rerank_scores(self):
        doc_store = store_of({"C1": [0.1, 1.0, 0.0], "C2": [1.0, 0.05, 0.0]})
        candidates = [Candidate("C1", 0.9), Candidate("C2", 0.8)]
        result, reason = rerank(candidates, "chest pain", QUERY_STORE, doc_store)
        assert reason is None
        assert [c.concept_id for c in result] == ["C2", "C1"]

    def test_equal_rerank_scores_keep_first_stage_order(self):
        doc_store = store_of({"C1": [0.0, 1.0, 0.0], "C2": [0.0, 0.0, 1.0]})
        candidates = [Candidate("C2", 0.9), Candidate("C1", 0.8)]
        result, reason = rerank(candidates, "chest pain", QUERY_STORE, doc_store)
        assert reason is None
        assert [c.concept_id for c in result] == ["C2", "C1"]

    def test_missing_mention_key_falls_back(self):
        doc_store = store_of({"C1": [1.0, 0.0, 0.0]})
        candidates = [Candidate("C1", 0.9)]
        result, reason = rerank(candidates, "unknown surface", QUERY_STORE, doc_store)
        assert result == candidates
        assert "unknown surface" in reason

    def test_missing_candidate_id_falls_back(self):
        doc_store = store_of({"C1": [1.0, 0.0, 0.0]})
        candidates = [Candidate("C1", 0.9), Candidate("C9", 0.8)]
        result, reason = rerank(candidates, "chest pain", QUERY_STORE, doc_store)
        assert result == candidates
        assert "C9" in reason

    def test_permutation_invariant(self):
        rng = np.random.default_rng(11)
        doc_store = store_of({f"C{i}": rng.standard_normal(3) for i in range(8)})
        candidates = [Candidate(f"C{i}", 1.0 - i / 10) for i in range(8)]
        result, reason = rerank(candidates, "chest pain", QUERY_STORE, doc_store)
        assert reason is None
        assert sorted(c.concept_id for c in result) == sorted(
            c.concept_id for c in candidates
        )

    def test_sorted_descending_and_scores_match_recompute(self):
        rng = np.random.default_rng(12)
        doc_store = store_of({f"C{i}": rng.standard_normal(3) for i in range(6)})
        candidates = [Candidate(f"C{i}", 0.5) for i in range(6)]
        result, _ = rerank(candidates, "chest pain", QUERY_STORE, doc_store)
        scores = [c.score for c in result]
        assert scores == sorted(scores, reverse=True)
        q = QUERY_STORE.vector("chest pain").astype(np.float64)
        for cand in result:
            expected = float(q @ doc_store.vector(cand.concept_id).astype(np.float64))
            assert cand.score == pytest.approx(expected, abs=1e-12)
