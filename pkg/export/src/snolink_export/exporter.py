"""Batch encoding of terms, surfaces, and token labels."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

import numpy as np
import torch

from .emb_format import write_emb

POOL_MEAN_TOKEN = "MeanToken"
POOL_CLS = "CLS"

# The engine's seven-label scheme; emitted labels must stay inside it.
LABELS7 = frozenset(
    ["O", "B-Finding", "I-Finding", "B-Procedure", "I-Procedure", "B-Body", "I-Body"]
)


class ExportError(Exception):
    pass


@dataclass
class ExportManifest:
    model: str
    pooling: str
    dim: int
    created: str
    input_digest: str

    def write(self, path) -> None:
        payload = {
            "model": self.model,
            "pooling": self.pooling,
            "dim": self.dim,
            "created": self.created,
            "input_digest": self.input_digest,
        }
        Path(path).write_text(
            json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _manifest(model_id, pooling, dim, input_path) -> ExportManifest:
    return ExportManifest(
        model=str(model_id),
        pooling=pooling,
        dim=dim,
        created=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        input_digest=_digest(input_path),
    )


def normalize_surface(text: str) -> str:
    # Mirrors the engine's dictionary/mention-store key convention.
    return " ".join(text.split()).lower()


class SentenceEncoder:
    """Pooled sentence embeddings from a (local or hub) encoder model."""

    def __init__(self, model_id: str, pooling: str = POOL_MEAN_TOKEN):
        from transformers import AutoModel, AutoTokenizer

        if pooling not in (POOL_MEAN_TOKEN, POOL_CLS):
            raise ExportError(f"unknown pooling {pooling!r}")
        self.model_id = model_id
        self.pooling = pooling
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_id)
            self.model = AutoModel.from_pretrained(model_id)
        except Exception as exc:
            raise ExportError(f"cannot load model {model_id}: {exc}") from exc
        self.model.eval()

    @property
    def dim(self) -> int:
        return int(self.model.config.hidden_size)

    @torch.no_grad()
    def encode(self, texts: list[str], batch_size: int = 32) -> np.ndarray:
        out = np.empty((len(texts), self.dim), dtype=np.float32)
        for lo in range(0, len(texts), batch_size):
            batch = texts[lo : lo + batch_size]
            enc = self.tokenizer(
                batch, padding=True, truncation=True, return_tensors="pt"
            )
            hidden = self.model(**enc).last_hidden_state
            if self.pooling == POOL_CLS:
                pooled = hidden[:, 0]
            else:
                mask = enc["attention_mask"].unsqueeze(-1).to(hidden.dtype)
                pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1)
            out[lo : lo + len(batch)] = pooled.numpy().astype(np.float32)
        return out


def read_concepts(path) -> list[tuple[str, str]]:
    """(concept_id, canonical term) pairs from a 3-column TSV.

    The exporter encodes one vector per id, so repeated ids are an error
    here; deduplicate (or drop synonym rows) upstream.
    """
    pairs: list[tuple[str, str]] = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ExportError(f"{path}: expected 3 fields at line {line_no}")
            concept_id, _top_class, term = parts
            if concept_id in seen:
                raise ExportError(f"duplicate concept id {concept_id}")
            seen.add(concept_id)
            pairs.append((concept_id, term))
    return pairs


def read_surfaces(path) -> list[tuple[str, str]]:
    """(normalized key, surface) pairs, one surface per line, deduplicated."""
    pairs: list[tuple[str, str]] = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            surface = line.rstrip("\n")
            key = normalize_surface(surface)
            if key and key not in seen:
                seen.add(key)
                pairs.append((key, surface))
    return pairs


def export_embeddings(
    pairs: list[tuple[str, str]],
    encoder: SentenceEncoder,
    out_path,
    input_path,
    batch_size: int = 32,
) -> ExportManifest:
    vectors = encoder.encode([text for _, text in pairs], batch_size=batch_size)
    dim = write_emb(
        [(key, vectors[i]) for i, (key, _) in enumerate(pairs)], out_path
    )
    return _manifest(encoder.model_id, encoder.pooling, dim, input_path)


def read_notes(path) -> list[tuple[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["note_id", "text"]:
            raise ExportError(f"{path}: expected header note_id,text")
        return [(row[0], row[1]) for row in reader]


class TokenLabeler:
    """Word-level seven-class labels from a token classification model."""

    def __init__(self, model_id: str):
        from transformers import AutoModelForTokenClassification, AutoTokenizer

        self.model_id = model_id
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_id)
            self.model = AutoModelForTokenClassification.from_pretrained(model_id)
        except Exception as exc:
            raise ExportError(f"cannot load model {model_id}: {exc}") from exc
        self.model.eval()
        labels = set(self.model.config.id2label.values())
        if not labels <= LABELS7:
            raise ExportError(
                f"model emits labels outside the seven-class scheme: {sorted(labels - LABELS7)}"
            )

    @property
    def dim(self) -> int:
        return int(self.model.config.hidden_size)

    @torch.no_grad()
    def label_note(self, note_id: str, text: str) -> dict:
        """One stage-1 record: word tokens with first-subword labels.

        Subword predictions collapse to word level via the first subword;
        offsets are character offsets into the given text.
        """
        if not text.strip():
            return {"note_id": note_id, "tokens": []}
        enc = self.tokenizer(
            text,
            return_offsets_mapping=True,
            truncation=True,
            return_tensors="pt",
        )
        logits = self.model(
            input_ids=enc["input_ids"], attention_mask=enc["attention_mask"]
        ).logits[0]
        probs = torch.softmax(logits, dim=-1)
        offsets = enc["offset_mapping"][0].tolist()
        word_ids = enc.word_ids(0)

        tokens = []
        current = None  # [word_id, start, end, label, score]
        for idx, word_id in enumerate(word_ids):
            if word_id is None:
                continue
            start, end = offsets[idx]
            if start == end:
                continue
            if current is not None and word_id == current[0]:
                current[2] = max(current[2], end)
                continue
            if current is not None:
                tokens.append(current)
            label_id = int(torch.argmax(probs[idx]))
            current = [
                word_id,
                start,
                end,
                self.model.config.id2label[label_id],
                float(probs[idx, label_id]),
            ]
        if current is not None:
            tokens.append(current)

        for _, start, end, _, _ in tokens:
            if end > len(text):
                raise ExportError(
                    f"offset misalignment in note {note_id}: "
                    f"token end {end} > note length {len(text)}"
                )
        return {
            "note_id": note_id,
            "tokens": [
                {"start": s, "end": e, "label": lab, "score": score}
                for _, s, e, lab, score in tokens
            ],
        }


def export_token_labels(
    notes_path, labeler: TokenLabeler, out_path
) -> ExportManifest:
    notes = read_notes(notes_path)
    with open(out_path, "w", encoding="utf-8") as fh:
        for note_id, text in notes:
            record = labeler.label_note(note_id, text)
            for tok in record["tokens"]:
                if tok["label"] not in LABELS7:
                    raise ExportError(
                        f"label {tok['label']!r} outside the seven-class scheme"
                    )
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    return _manifest(labeler.model_id, "FirstSubword", labeler.dim, notes_path)
