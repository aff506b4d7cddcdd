"""Corpus loading: notes, standoff annotations, and the concept catalog.

All offsets are in Unicode scalar values (Python string indices), never
bytes. Loaded collections are immutable after construction.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Optional


class CorpusError(Exception):
    """Raised on unrecoverable corpus format problems."""


class TopClass(str, Enum):
    """First-level SNOMED hierarchy class of a concept."""

    BODY_STRUCTURE = "BodyStructure"
    FINDING = "Finding"
    PROCEDURE = "Procedure"


# Accept the human-readable hierarchy names alongside the canonical ones.
_TOP_CLASS_ALIASES = {
    "bodystructure": TopClass.BODY_STRUCTURE,
    "body structure": TopClass.BODY_STRUCTURE,
    "finding": TopClass.FINDING,
    "findings": TopClass.FINDING,
    "procedure": TopClass.PROCEDURE,
}


def parse_top_class(value: str) -> TopClass:
    try:
        return _TOP_CLASS_ALIASES[value.strip().lower()]
    except KeyError:
        raise CorpusError(
            f"unknown top-level class {value!r}; expected one of "
            f"{[c.value for c in TopClass]}"
        ) from None


@dataclass(frozen=True)
class Note:
    note_id: str
    text: str


@dataclass(frozen=True)
class Annotation:
    """A standoff span: [start, end) character offsets into one note."""

    note_id: str
    start: int
    end: int
    concept_id: str


@dataclass(frozen=True)
class RejectedRow:
    line_no: int
    note_id: str
    reason: str


@dataclass
class ConceptRecord:
    concept_id: str
    canonical_term: str
    top_class: TopClass
    synonyms: list[str] = field(default_factory=list)

    @property
    def terms(self) -> list[str]:
        return [self.canonical_term, *self.synonyms]


class NoteSet:
    """Notes keyed by note_id, preserving file order."""

    def __init__(self, notes: Iterable[Note] = ()):
        self._notes: dict[str, Note] = {}
        for note in notes:
            self.add(note)

    def add(self, note: Note) -> None:
        if not note.note_id:
            raise CorpusError("empty note_id")
        if note.note_id in self._notes:
            raise CorpusError(f"duplicate note_id {note.note_id}")
        self._notes[note.note_id] = note

    def __len__(self) -> int:
        return len(self._notes)

    def __iter__(self) -> Iterator[Note]:
        return iter(self._notes.values())

    def __contains__(self, note_id: str) -> bool:
        return note_id in self._notes

    def __getitem__(self, note_id: str) -> Note:
        return self._notes[note_id]

    def get(self, note_id: str) -> Optional[Note]:
        return self._notes.get(note_id)


class AnnotationSet:
    """Accepted annotations in file order, plus the rejection report."""

    def __init__(
        self,
        annotations: Iterable[Annotation] = (),
        rejected: Iterable[RejectedRow] = (),
    ):
        self.annotations: list[Annotation] = list(annotations)
        self.rejected: list[RejectedRow] = list(rejected)

    def __len__(self) -> int:
        return len(self.annotations)

    def __iter__(self) -> Iterator[Annotation]:
        return iter(self.annotations)

    def for_note(self, note_id: str) -> list[Annotation]:
        return [a for a in self.annotations if a.note_id == note_id]


class ConceptCatalog:
    def __init__(self, records: Iterable[ConceptRecord] = ()):
        self._records: dict[str, ConceptRecord] = {}
        for rec in records:
            if rec.concept_id in self._records:
                raise CorpusError(f"duplicate concept_id {rec.concept_id}")
            self._records[rec.concept_id] = rec

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[ConceptRecord]:
        return iter(self._records.values())

    def __contains__(self, concept_id: str) -> bool:
        return concept_id in self._records

    def get(self, concept_id: str) -> Optional[ConceptRecord]:
        return self._records.get(concept_id)

    def top_class_of(self, concept_id: str) -> TopClass:
        rec = self._records.get(concept_id)
        if rec is None:
            raise CorpusError(f"unknown concept_id {concept_id}")
        return rec.top_class


def load_notes(path) -> NoteSet:
    """Read a `note_id,text` CSV (RFC-4180 quoting) into a NoteSet."""
    notes = NoteSet()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["note_id", "text"]:
            raise CorpusError(f"{path}: expected header note_id,text, got {header}")
        for row in reader:
            if len(row) != 2:
                raise CorpusError(f"{path}: malformed row at line {reader.line_num}")
            notes.add(Note(note_id=row[0], text=row[1]))
    return notes


def save_notes(notes: NoteSet, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["note_id", "text"])
        for note in notes:
            writer.writerow([note.note_id, note.text])


def load_annotations(path, notes: NoteSet) -> AnnotationSet:
    """Read `note_id,start,end,concept_id` rows, validating bounds.

    Invalid rows are rejected with a reason, not fatal: the source
    annotations are known to be noisy. File order is preserved for
    accepted rows.
    """
    accepted: list[Annotation] = []
    rejected: list[RejectedRow] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["note_id", "start", "end", "concept_id"]:
            raise CorpusError(
                f"{path}: expected header note_id,start,end,concept_id, got {header}"
            )
        for row in reader:
            if len(row) != 4:
                raise CorpusError(f"{path}: malformed row at line {reader.line_num}")
            note_id, start_s, end_s, concept_id = row
            try:
                start, end = int(start_s), int(end_s)
            except ValueError:
                raise CorpusError(
                    f"{path}: non-integer offset at line {reader.line_num}"
                ) from None
            note = notes.get(note_id)
            if note is None:
                rejected.append(RejectedRow(reader.line_num, note_id, "unknown note_id"))
                continue
            if start >= end:
                rejected.append(RejectedRow(reader.line_num, note_id, "empty span"))
                continue
            if start < 0 or end > len(note.text):
                rejected.append(RejectedRow(reader.line_num, note_id, "out of bounds"))
                continue
            if not concept_id:
                rejected.append(RejectedRow(reader.line_num, note_id, "empty concept_id"))
                continue
            accepted.append(Annotation(note_id, start, end, concept_id))
    return AnnotationSet(accepted, rejected)


def save_annotations(anns: Iterable[Annotation], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["note_id", "start", "end", "concept_id"])
        for a in anns:
            writer.writerow([a.note_id, a.start, a.end, a.concept_id])


def load_concepts(path) -> ConceptCatalog:
    """Read a tab-separated concept catalog.

    Columns: concept_id, top_class, term. Repeated concept_ids contribute
    synonyms to the first row's record; the first row's term is canonical.
    """
    records: dict[str, ConceptRecord] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise CorpusError(f"{path}: expected 3 tab-separated fields at line {line_no}")
            concept_id, top_class_s, term = parts
            top_class = parse_top_class(top_class_s)
            existing = records.get(concept_id)
            if existing is None:
                records[concept_id] = ConceptRecord(concept_id, term, top_class)
            else:
                if existing.top_class is not top_class:
                    raise CorpusError(
                        f"{path}: conflicting top_class for {concept_id} at line {line_no}"
                    )
                if term != existing.canonical_term and term not in existing.synonyms:
                    existing.synonyms.append(term)
    return ConceptCatalog(records.values())
