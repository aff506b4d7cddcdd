"""End-to-end linking: stage-1 token labels in, concept predictions out.

Per note: decode typed spans from the ingested token labels, then link
each span through the dictionary override and/or embedding retrieval
(optionally class-filtered and reranked).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, TextIO

from .biotag import LABEL_SET, Token, decode_spans
from .corpus import ConceptCatalog, Note, TopClass
from .dictionary import Dictionary, normalize_surface
from .rerank import rerank
from .store import Candidate, EmbeddingStore, top_k

DICT_OVERRIDE = "override"
DICT_SUPPLEMENT = "supplement"
DICT_OFF = "off"

SOURCE_DICTIONARY = "Dictionary"
SOURCE_EMBEDDING = "Embedding"


class PipelineError(Exception):
    pass


@dataclass(frozen=True)
class Prediction:
    note_id: str
    start: int
    end: int
    concept_id: str
    score: float
    source: str


@dataclass
class PipelineConfig:
    top_k: int = 5
    dictionary_mode: str = DICT_OVERRIDE
    class_filter: bool = True

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.dictionary_mode not in (DICT_OVERRIDE, DICT_SUPPLEMENT, DICT_OFF):
            raise ValueError(f"unknown dictionary_mode {self.dictionary_mode!r}")


@dataclass
class SpanCandidates:
    """Candidate list retained for one linked span (for reporting)."""

    note_id: str
    start: int
    end: int
    surface: str
    candidates: list[Candidate]


@dataclass
class LinkReport:
    skipped: list[dict] = field(default_factory=list)
    rerank_fallbacks: list[dict] = field(default_factory=list)
    notes_processed: int = 0
    spans_decoded: int = 0

    def to_dict(self) -> dict:
        return {
            "notes_processed": self.notes_processed,
            "spans_decoded": self.spans_decoded,
            "skipped": self.skipped,
            "rerank_fallbacks": self.rerank_fallbacks,
        }


def class_sub_stores(
    concept_store: EmbeddingStore, catalog: ConceptCatalog
) -> dict[TopClass, EmbeddingStore]:
    """One contiguous sub-store per top-level class, built once.

    Store ids missing from the catalog are unreachable under class
    filtering; they stay reachable when filtering is off.
    """
    by_class: dict[TopClass, list[str]] = {cls: [] for cls in TopClass}
    for cid in concept_store.ids:
        rec = catalog.get(cid)
        if rec is not None:
            by_class[rec.top_class].append(cid)
    return {
        cls: concept_store.subset(ids) for cls, ids in by_class.items() if ids
    }


def parse_stage1_record(line: str) -> tuple[str, list[Token], list[str], list[float]]:
    """Parse one tokens.jsonl line into (note_id, tokens, labels, scores)."""
    try:
        obj = json.loads(line)
        note_id = obj["note_id"]
        raw_tokens = obj["tokens"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise PipelineError(f"malformed stage-1 record: {exc}") from None
    tokens: list[Token] = []
    labels: list[str] = []
    scores: list[float] = []
    for tok in raw_tokens:
        try:
            start, end, label = int(tok["start"]), int(tok["end"]), tok["label"]
            score = float(tok.get("score", 1.0))
        except (KeyError, TypeError, ValueError) as exc:
            raise PipelineError(
                f"malformed stage-1 record for note {note_id}: {exc}"
            ) from None
        if label not in LABEL_SET:
            raise PipelineError(
                f"malformed stage-1 record for note {note_id}: bad label {label!r}"
            )
        if start >= end:
            raise PipelineError(
                f"malformed stage-1 record for note {note_id}: empty token span"
            )
        tokens.append(Token(start, end, ""))
        labels.append(label)
        scores.append(score)
    return note_id, tokens, labels, scores


def link_note(
    note: Note,
    tokens: list[Token],
    labels: list[str],
    mention_store: EmbeddingStore,
    concept_store: EmbeddingStore,
    dictionary: Optional[Dictionary],
    cfg: PipelineConfig,
    sub_stores: Optional[dict[TopClass, EmbeddingStore]] = None,
    rerank_query_store: Optional[EmbeddingStore] = None,
    rerank_doc_store: Optional[EmbeddingStore] = None,
    report: Optional[LinkReport] = None,
) -> tuple[list[Prediction], list[SpanCandidates]]:
    """Link every decoded span of one note.

    Dictionary modes: override consults the dictionary first and
    short-circuits retrieval on a hit; supplement consults it only when
    the span has no mention embedding; off never consults it.
    """
    if report is None:
        report = LinkReport()
    for tok in tokens:
        if tok.end > len(note.text):
            raise PipelineError(
                f"malformed stage-1 record for note {note.note_id}: "
                f"token [{tok.start},{tok.end}) beyond note length {len(note.text)}"
            )
    # Surfaces come from the note text, not the record.
    tokens = [Token(t.start, t.end, note.text[t.start:t.end]) for t in tokens]
    spans = decode_spans(tokens, labels)
    report.spans_decoded += len(spans)

    predictions: list[Prediction] = []
    all_candidates: list[SpanCandidates] = []
    for span in spans:
        surface = note.text[span.start:span.end]
        key = normalize_surface(surface)

        def dict_hit() -> Optional[str]:
            if dictionary is None or cfg.dictionary_mode == DICT_OFF:
                return None
            return dictionary.lookup(key)

        if cfg.dictionary_mode == DICT_OVERRIDE:
            concept = dict_hit()
            if concept is not None:
                predictions.append(
                    Prediction(note.note_id, span.start, span.end, concept, 1.0, SOURCE_DICTIONARY)
                )
                continue

        mention_vec = mention_store.vector(key)
        if mention_vec is None:
            concept = dict_hit() if cfg.dictionary_mode == DICT_SUPPLEMENT else None
            if concept is not None:
                predictions.append(
                    Prediction(note.note_id, span.start, span.end, concept, 1.0, SOURCE_DICTIONARY)
                )
            else:
                report.skipped.append(
                    {
                        "note_id": note.note_id,
                        "start": span.start,
                        "end": span.end,
                        "surface": surface,
                        "reason": "no mention embedding",
                    }
                )
            continue

        if cfg.class_filter:
            target = (sub_stores or {}).get(span.top_class)
        else:
            target = concept_store
        if target is None or len(target) == 0:
            report.skipped.append(
                {
                    "note_id": note.note_id,
                    "start": span.start,
                    "end": span.end,
                    "surface": surface,
                    "reason": f"no concepts in class {span.top_class.value}",
                }
            )
            continue
        candidates = top_k(target, mention_vec, cfg.top_k)

        if rerank_query_store is not None and rerank_doc_store is not None:
            candidates, reason = rerank(
                candidates, key, rerank_query_store, rerank_doc_store
            )
            if reason is not None:
                report.rerank_fallbacks.append(
                    {
                        "note_id": note.note_id,
                        "start": span.start,
                        "end": span.end,
                        "reason": reason,
                    }
                )

        best = candidates[0]
        predictions.append(
            Prediction(
                note.note_id, span.start, span.end, best.concept_id, best.score, SOURCE_EMBEDDING
            )
        )
        all_candidates.append(
            SpanCandidates(note.note_id, span.start, span.end, surface, candidates)
        )

    report.notes_processed += 1
    return predictions, all_candidates


def write_candidates_jsonl(all_candidates: list[SpanCandidates], fh: TextIO) -> None:
    for sc in all_candidates:
        fh.write(
            json.dumps(
                {
                    "note_id": sc.note_id,
                    "start": sc.start,
                    "end": sc.end,
                    "surface": sc.surface,
                    "candidates": [
                        {"concept_id": c.concept_id, "score": c.score}
                        for c in sc.candidates
                    ],
                },
                sort_keys=True,
            )
            + "\n"
        )
