"""Note text cleaning with offset bookkeeping.

Every transformation that edits text returns an OffsetMap so standoff
annotations can be pushed through it instead of silently drifting.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .corpus import Annotation, AnnotationSet, Note, NoteSet

REMOVED = -1

# Literal artifacts replaced by a single space each. "\\n" is the
# two-character backslash-n sequence embedded as text, not a newline.
DEFAULT_MARKUP = ("<br>", "</br>", "<br/>", "\\n")

DEFAULT_EXCLUDED_HEADERS = (
    "medications on admission:",
    "___ on admission:",
    "discharge medications:",
)


@dataclass
class OffsetMap:
    """Original character index -> new index, or REMOVED.

    positions[i] is the new index of original character i; REMOVED marks
    characters deleted by the transformation. Restricted to surviving
    characters the mapping is strictly increasing.
    """

    positions: list[int]
    new_length: int

    def is_removed(self, index: int) -> bool:
        return self.positions[index] == REMOVED

    def remap_span(self, start: int, end: int) -> Optional[tuple[int, int]]:
        """Map [start, end) through; None if any covered char was removed."""
        seg = self.positions[start:end]
        if not seg or REMOVED in seg:
            return None
        return seg[0], seg[-1] + 1

    @classmethod
    def identity(cls, length: int) -> "OffsetMap":
        return cls(list(range(length)), length)


def strip_markup(text: str, tags: Sequence[str] = DEFAULT_MARKUP) -> tuple[str, OffsetMap]:
    """Replace each markup artifact by a single space.

    The first character of each matched artifact maps to the replacement
    space; the remaining characters are marked REMOVED. A space (not bare
    deletion) keeps word tokenization from fusing words across a tag.
    """
    if not tags:
        return text, OffsetMap.identity(len(text))
    pattern = re.compile(
        "|".join(re.escape(t) for t in sorted(tags, key=len, reverse=True))
    )
    positions = [REMOVED] * len(text)
    out: list[str] = []
    last = 0
    for m in pattern.finditer(text):
        for i in range(last, m.start()):
            positions[i] = len(out)
            out.append(text[i])
        positions[m.start()] = len(out)
        out.append(" ")
        last = m.end()
    for i in range(last, len(text)):
        positions[i] = len(out)
        out.append(text[i])
    return "".join(out), OffsetMap(positions, len(out))


@dataclass
class ExclusionMask:
    """Disjoint, sorted [start, end) ranges of one note to exclude."""

    note_id: str
    ranges: list[tuple[int, int]] = field(default_factory=list)

    def covers(self, start: int, end: int) -> bool:
        return any(start < r_end and end > r_start for r_start, r_end in self.ranges)


def _line_starts(text: str) -> list[int]:
    starts = [0]
    for i, ch in enumerate(text):
        if ch == "\n":
            starts.append(i + 1)
    return starts


def mask_sections(
    note: Note, headers: Sequence[str] = DEFAULT_EXCLUDED_HEADERS
) -> ExclusionMask:
    """Mask sections introduced by any of the given header lines.

    A line equal (case-insensitive, trimmed) to a header opens a range
    that runs until the start of the next header-like line (trimmed line
    ending in ':') or the end of the note. The source material never
    states where such a section ends; this rule is isolated here.
    """
    wanted = {h.strip().lower() for h in headers}
    text = note.text
    starts = _line_starts(text)
    lines = text.split("\n")
    ranges: list[tuple[int, int]] = []
    i = 0
    while i < len(lines):
        if lines[i].strip().lower() in wanted:
            begin = starts[i]
            j = i + 1
            while j < len(lines) and not lines[j].strip().endswith(":"):
                j += 1
            end = starts[j] if j < len(lines) else len(text)
            ranges.append((begin, end))
            i = j
        else:
            i += 1
    # Merge touching or overlapping ranges so the mask stays disjoint.
    merged: list[tuple[int, int]] = []
    for begin, end in sorted(ranges):
        if merged and begin <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((begin, end))
    return ExclusionMask(note.note_id, merged)


def remap_annotations(
    anns: AnnotationSet, offset_map: OffsetMap
) -> tuple[AnnotationSet, list[Annotation]]:
    """Push annotation offsets through an OffsetMap.

    Annotations whose span touches a removed character are dropped whole
    rather than clipped: a clipped clinical mention changes meaning.
    """
    kept: list[Annotation] = []
    dropped: list[Annotation] = []
    for ann in anns:
        mapped = offset_map.remap_span(ann.start, ann.end)
        if mapped is None:
            dropped.append(ann)
        else:
            kept.append(Annotation(ann.note_id, mapped[0], mapped[1], ann.concept_id))
    return AnnotationSet(kept), dropped


@dataclass(frozen=True)
class ValidationEntry:
    annotation: Annotation
    status: str  # "ok" | "out of bounds" | "suspect shift"
    surface: Optional[str]


def validate_annotations(
    anns: Iterable[Annotation], notes: NoteSet
) -> list[ValidationEntry]:
    """Report per-annotation bounds status and extracted surface.

    Whitespace-only surfaces are flagged "suspect shift": they are the
    typical symptom of offsets shifted by removed markup. Detection only;
    automatic repair is out of scope.
    """
    report = []
    for ann in anns:
        note = notes.get(ann.note_id)
        if note is None or ann.start < 0 or ann.end > len(note.text) or ann.start >= ann.end:
            report.append(ValidationEntry(ann, "out of bounds", None))
            continue
        surface = note.text[ann.start:ann.end]
        status = "suspect shift" if surface.strip() == "" else "ok"
        report.append(ValidationEntry(ann, status, surface))
    return report
