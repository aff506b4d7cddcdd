"""Evaluation metrics for both pipeline stages.

* token-level macro-F1 over the seven BIO labels,
* candidate hit rate at k,
* per-class character intersection-over-union, pooled corpus-wide,
* class macro-averaged character IoU (the headline span metric).

Character sets are keyed by (note_id, character index) pairs and pooled
globally across the corpus; a character covered by several same-class
spans counts once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

from .corpus import Annotation
from .store import Candidate


class MetricError(Exception):
    pass


@dataclass(frozen=True)
class ClassPRF:
    key: Hashable
    precision: float
    recall: float
    f1: float


def macro_f1(gold: Sequence[str], pred: Sequence[str]) -> tuple[float, list[ClassPRF]]:
    """Macro-averaged F1 over token positions.

    Averages over the classes present in gold or pred; classes absent
    from both contribute nothing. F1 is 0 when precision + recall is 0.
    """
    if len(gold) != len(pred):
        raise MetricError(f"length mismatch: {len(gold)} gold vs {len(pred)} pred")
    classes = sorted(set(gold) | set(pred))
    per_class: list[ClassPRF] = []
    for cls in classes:
        tp = sum(1 for g, p in zip(gold, pred) if g == cls and p == cls)
        fp = sum(1 for g, p in zip(gold, pred) if g != cls and p == cls)
        fn = sum(1 for g, p in zip(gold, pred) if g == cls and p != cls)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall
            else 0.0
        )
        per_class.append(ClassPRF(cls, precision, recall, f1))
    if not per_class:
        raise MetricError("no classes present")
    return sum(c.f1 for c in per_class) / len(per_class), per_class


def hit_at_k(gold_concept: str, candidates: Sequence[Candidate], k: int) -> int:
    """1 iff the gold concept appears among the first min(k, len) candidates."""
    return int(any(c.concept_id == gold_concept for c in candidates[:k]))


def mean_hit_rate(
    pairs: Iterable[tuple[str, Sequence[Candidate]]], k: int
) -> float:
    hits = total = 0
    for gold_concept, candidates in pairs:
        hits += hit_at_k(gold_concept, candidates, k)
        total += 1
    if total == 0:
        raise MetricError("no mentions to score")
    return hits / total


CharSet = dict[Hashable, set[tuple[str, int]]]


def build_char_sets(anns: Iterable[Annotation]) -> CharSet:
    """Pool annotated characters per concept_id across all notes."""
    sets: CharSet = {}
    for ann in anns:
        chars = sets.setdefault(ann.concept_id, set())
        chars.update((ann.note_id, i) for i in range(ann.start, ann.end))
    return sets


def char_iou(pred: CharSet, gold: CharSet, key: Hashable) -> float:
    """|P ∩ G| / |P ∪ G| over (note_id, index) pairs for one class."""
    p = pred.get(key, set())
    g = gold.get(key, set())
    union = p | g
    if not union:
        raise MetricError(f"class not present: {key!r}")
    return len(p & g) / len(union)


@dataclass
class IouReport:
    macro: float
    per_class: dict[Hashable, float]


def macro_iou(
    pred_anns: Iterable[Annotation], gold_anns: Iterable[Annotation]
) -> IouReport:
    """Character IoU averaged over every concept present in either side."""
    pred_sets = build_char_sets(pred_anns)
    gold_sets = build_char_sets(gold_anns)
    classes = sorted(set(pred_sets) | set(gold_sets), key=str)
    if not classes:
        raise MetricError("no classes")
    per_class = {cls: char_iou(pred_sets, gold_sets, cls) for cls in classes}
    return IouReport(sum(per_class.values()) / len(per_class), per_class)


def mean_best_cosine(candidate_lists: Iterable[Sequence[Candidate]], k: int) -> float:
    """Mean over mentions of the best candidate cosine within the top k.

    Companion reading of the hit metric: how close the best of the top-k
    candidates is, rather than whether the gold id is among them.
    """
    best: list[float] = []
    for candidates in candidate_lists:
        head = candidates[:k]
        if head:
            best.append(max(c.score for c in head))
    if not best:
        raise MetricError("no candidate lists to score")
    return sum(best) / len(best)
