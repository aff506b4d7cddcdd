"""Surface-form dictionary built from training annotations.

Linking through the dictionary is exact one-to-one: a normalized surface
either coincides completely with an entry or there is no match. No fuzzy
metric is offered anywhere in this module by design.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Optional

from .corpus import AnnotationSet, NoteSet


def normalize_surface(text: str) -> str:
    """Lowercase, collapse whitespace runs, strip the ends."""
    return " ".join(text.split()).lower()


@dataclass
class Dictionary:
    """normalized surface -> (modal concept_id, its occurrence count)."""

    entries: dict[str, tuple[str, int]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, surface: str) -> Optional[str]:
        entry = self.entries.get(normalize_surface(surface))
        return entry[0] if entry else None


def build_dictionary(
    anns: AnnotationSet, notes: NoteSet, min_count: int = 1
) -> Dictionary:
    """Map each sufficiently common surface to its most frequent concept.

    A surface qualifies when its total occurrence count reaches min_count;
    the entry holds the modal concept_id for that surface, ties broken by
    the lexicographically smaller concept_id.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    per_surface: dict[str, Counter[str]] = defaultdict(Counter)
    for ann in anns:
        note = notes[ann.note_id]
        surface = normalize_surface(note.text[ann.start:ann.end])
        if surface:
            per_surface[surface][ann.concept_id] += 1

    entries: dict[str, tuple[str, int]] = {}
    for surface, concept_counts in per_surface.items():
        if sum(concept_counts.values()) < min_count:
            continue
        concept_id, count = min(
            concept_counts.items(), key=lambda kv: (-kv[1], kv[0])
        )
        entries[surface] = (concept_id, count)
    return Dictionary(entries)


def save_dictionary(dictionary: Dictionary, path) -> None:
    """Write sorted `surface<TAB>concept_id<TAB>count` rows."""
    with open(path, "w", encoding="utf-8") as fh:
        for surface in sorted(dictionary.entries):
            concept_id, count = dictionary.entries[surface]
            fh.write(f"{surface}\t{concept_id}\t{count}\n")


def load_dictionary(path) -> Dictionary:
    entries: dict[str, tuple[str, int]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}: expected 3 fields at line {line_no}")
            surface, concept_id, count_s = parts
            entries[surface] = (concept_id, int(count_s))
    return Dictionary(entries)
