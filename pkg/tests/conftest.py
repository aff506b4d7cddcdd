import csv
import json

import numpy as np
import pytest

from snolink import biotag, store
from snolink.corpus import (
    Annotation,
    AnnotationSet,
    ConceptCatalog,
    ConceptRecord,
    Note,
    NoteSet,
    TopClass,
)

FIXTURE_CONCEPTS = [
    ("C01", TopClass.FINDING, "chest pain"),
    ("C02", TopClass.FINDING, "fever"),
    ("C03", TopClass.FINDING, "headache"),
    ("C04", TopClass.PROCEDURE, "appendectomy"),
    ("C05", TopClass.PROCEDURE, "chest xray"),
    ("C06", TopClass.BODY_STRUCTURE, "left lung"),
    ("C07", TopClass.BODY_STRUCTURE, "liver"),
    ("C08", TopClass.FINDING, "nausea"),
]

FIXTURE_NOTES = [
    ("n1", "Patient reports chest pain and fever today."),
    ("n2", "Severe headache with nausea. Liver normal."),
    ("n3", "Underwent appendectomy yesterday. Chest xray clear."),
    ("n4", "Left lung clear. No fever. No chest pain."),
    ("n5", "Headache resolved. Nausea persists."),
]

# (note_id, surface as it appears in the note, concept_id); offsets are
# derived by searching the note text so they cannot drift.
FIXTURE_MENTIONS = [
    ("n1", "chest pain", "C01"),
    ("n1", "fever", "C02"),
    ("n2", "headache", "C03"),
    ("n2", "nausea", "C08"),
    ("n2", "Liver", "C07"),
    ("n3", "appendectomy", "C04"),
    ("n3", "Chest xray", "C05"),
    ("n4", "Left lung", "C06"),
    ("n4", "fever", "C02"),
    ("n4", "chest pain", "C01"),
    ("n5", "Headache", "C03"),
    ("n5", "Nausea", "C08"),
]


def fixture_notes() -> NoteSet:
    return NoteSet(Note(nid, text) for nid, text in FIXTURE_NOTES)


def fixture_catalog() -> ConceptCatalog:
    return ConceptCatalog(
        ConceptRecord(cid, term, cls) for cid, cls, term in FIXTURE_CONCEPTS
    )


def fixture_annotations(notes: NoteSet) -> AnnotationSet:
    anns = []
    for nid, surface, cid in FIXTURE_MENTIONS:
        start = notes[nid].text.index(surface)
        anns.append(Annotation(nid, start, start + len(surface), cid))
    return AnnotationSet(anns)


def fixture_vectors(dim: int = 32, seed: int = 7) -> dict[str, np.ndarray]:
    """One unit vector per fixture concept."""
    rng = np.random.default_rng(seed)
    vecs = {}
    for cid, _, _ in FIXTURE_CONCEPTS:
        v = rng.standard_normal(dim)
        vecs[cid] = (v / np.linalg.norm(v)).astype(np.float32)
    return vecs


def write_fixture_corpus(tmp_path, redirect: dict[str, str] | None = None) -> dict:
    """Materialize the end-to-end fixture corpus on disk.

    Mention vectors are built to equal their gold concept's vector, so an
    embedding-only run links every span perfectly. `redirect` maps
    normalized surfaces to concept ids for the dictionary file.
    """
    notes = fixture_notes()
    catalog = fixture_catalog()
    anns = fixture_annotations(notes)
    vectors = fixture_vectors()

    paths = {
        "notes": tmp_path / "notes.csv",
        "gold": tmp_path / "gold.csv",
        "concepts": tmp_path / "concepts.tsv",
        "concept_emb": tmp_path / "concepts.emb",
        "mention_emb": tmp_path / "mentions.emb",
        "tokens": tmp_path / "tokens.jsonl",
        "dict": tmp_path / "dict.tsv",
    }

    with open(paths["notes"], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["note_id", "text"])
        for nid, text in FIXTURE_NOTES:
            writer.writerow([nid, text])

    with open(paths["gold"], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["note_id", "start", "end", "concept_id"])
        for ann in anns:
            writer.writerow([ann.note_id, ann.start, ann.end, ann.concept_id])

    with open(paths["concepts"], "w", encoding="utf-8") as fh:
        for cid, cls, term in FIXTURE_CONCEPTS:
            fh.write(f"{cid}\t{cls.value}\t{term}\n")

    store.write_store(
        [(cid, vectors[cid]) for cid, _, _ in FIXTURE_CONCEPTS], paths["concept_emb"]
    )
    mention_records = {}
    for _, surface, cid in FIXTURE_MENTIONS:
        mention_records[" ".join(surface.split()).lower()] = vectors[cid]
    store.write_store(sorted(mention_records.items()), paths["mention_emb"])

    with open(paths["tokens"], "w", encoding="utf-8") as fh:
        for note in notes:
            tokens = biotag.tokenize(note.text)
            labels = biotag.encode_bio(tokens, anns.for_note(note.note_id), catalog)
            fh.write(
                json.dumps(
                    {
                        "note_id": note.note_id,
                        "tokens": [
                            {"start": t.start, "end": t.end, "label": lab, "score": 1.0}
                            for t, lab in zip(tokens, labels)
                        ],
                    }
                )
                + "\n"
            )

    with open(paths["dict"], "w", encoding="utf-8") as fh:
        for surface, cid in sorted((redirect or {}).items()):
            fh.write(f"{surface}\t{cid}\t1\n")

    return {name: str(p) for name, p in paths.items()}


@pytest.fixture
def fixture_corpus(tmp_path):
    return write_fixture_corpus(tmp_path)
