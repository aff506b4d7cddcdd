"""Word tokenization and the seven-label BIO scheme.

Labels cross B/I/O with the three top-level concept classes:
O, B-Finding, I-Finding, B-Procedure, I-Procedure, B-Body, I-Body.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import Annotation, ConceptCatalog, CorpusError, TopClass

CLASS_TAGS = {
    TopClass.FINDING: "Finding",
    TopClass.PROCEDURE: "Procedure",
    TopClass.BODY_STRUCTURE: "Body",
}
TAG_CLASSES = {tag: cls for cls, tag in CLASS_TAGS.items()}

LABELS = (
    "O",
    "B-Finding",
    "I-Finding",
    "B-Procedure",
    "I-Procedure",
    "B-Body",
    "I-Body",
)
LABEL_SET = frozenset(LABELS)


class BioError(Exception):
    pass


@dataclass(frozen=True)
class Token:
    start: int
    end: int
    surface: str


@dataclass(frozen=True)
class TypedSpan:
    start: int
    end: int
    top_class: TopClass


def tokenize(text: str) -> list[Token]:
    """Split into word tokens with character offsets.

    Maximal alphanumeric runs are tokens; every other non-whitespace
    character is its own single-character token.
    """
    tokens: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch.isalnum():
            j = i + 1
            while j < n and text[j].isalnum():
                j += 1
            tokens.append(Token(i, j, text[i:j]))
            i = j
        else:
            tokens.append(Token(i, i + 1, ch))
            i += 1
    return tokens


def _resolve_overlaps(anns: Iterable[Annotation]) -> list[Annotation]:
    """Drop annotations overlapped by a longer (or equal-length earlier) one."""
    ordered = sorted(anns, key=lambda a: (-(a.end - a.start), a.start))
    kept: list[Annotation] = []
    for ann in ordered:
        if not any(ann.start < k.end and ann.end > k.start for k in kept):
            kept.append(ann)
    kept.sort(key=lambda a: a.start)
    return kept


def encode_bio(
    tokens: Sequence[Token],
    anns: Iterable[Annotation],
    catalog: ConceptCatalog,
) -> list[str]:
    """Label each token with the BIO scheme over the three top classes.

    A token overlapping an annotation by at least one character counts as
    inside it; the first such token gets B-{class}, the rest I-{class}.
    Overlapping annotations are resolved longest-first before labeling.
    """
    unknown = sorted(
        {a.concept_id for a in anns if a.concept_id not in catalog}
    )
    if unknown:
        raise BioError(f"unresolvable concept_id(s): {', '.join(unknown)}")

    labels = ["O"] * len(tokens)
    for ann in _resolve_overlaps(anns):
        tag = CLASS_TAGS[catalog.top_class_of(ann.concept_id)]
        first = True
        for idx, tok in enumerate(tokens):
            if tok.start < ann.end and tok.end > ann.start:
                if labels[idx] != "O":
                    continue  # already claimed by an earlier annotation
                labels[idx] = f"{'B' if first else 'I'}-{tag}"
                first = False
    return labels


def decode_spans(tokens: Sequence[Token], labels: Sequence[str]) -> list[TypedSpan]:
    """Reconstruct typed spans from a label sequence.

    Maximal B-{c} (I-{c})* runs become one span. An I-{c} without a
    preceding B/I of the same class is promoted to B-{c}.
    """
    if len(tokens) != len(labels):
        raise BioError(
            f"length mismatch: {len(tokens)} tokens vs {len(labels)} labels"
        )
    spans: list[TypedSpan] = []
    open_tag: str | None = None
    open_start = open_end = 0
    for tok, label in zip(tokens, labels):
        if label not in LABEL_SET:
            raise BioError(f"invalid label {label!r}")
        if label == "O":
            if open_tag is not None:
                spans.append(TypedSpan(open_start, open_end, TAG_CLASSES[open_tag]))
                open_tag = None
            continue
        prefix, tag = label.split("-", 1)
        starts_new = prefix == "B" or open_tag != tag
        if starts_new:
            if open_tag is not None:
                spans.append(TypedSpan(open_start, open_end, TAG_CLASSES[open_tag]))
            open_tag = tag
            open_start = tok.start
        open_end = tok.end
    if open_tag is not None:
        spans.append(TypedSpan(open_start, open_end, TAG_CLASSES[open_tag]))
    return spans
