import csv
import json

import numpy as np
import pytest

from snolink import store
from snolink.cli import main
from tests.conftest import FIXTURE_MENTIONS, write_fixture_corpus


def run(argv):
    return main([str(a) for a in argv])


def read_predictions(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        return [(r[0], int(r[1]), int(r[2]), r[3]) for r in reader]


def link_args(paths, out, extra=()):
    return [
        "link",
        "--notes", paths["notes"],
        "--tokens", paths["tokens"],
        "--concepts", paths["concepts"],
        "--concept-emb", paths["concept_emb"],
        "--mention-emb", paths["mention_emb"],
        "--out", out,
        *extra,
    ]


class TestPreprocessCommand:
    def test_masks_and_clean_notes(self, tmp_path):
        notes_csv = tmp_path / "notes.csv"
        notes_csv.write_text(
            'note_id,text\nn1,"History<br>of pain.\nDischarge Medications:\naspirin"\n',
            encoding="utf-8",
        )
        anns_csv = tmp_path / "anns.csv"
        anns_csv.write_text(
            "note_id,start,end,concept_id\nn1,14,18,C1\n", encoding="utf-8"
        )
        out_dir = tmp_path / "out"
        assert run(
            [
                "preprocess",
                "--notes", notes_csv,
                "--annotations", anns_csv,
                "--out-dir", out_dir,
            ]
        ) == 0
        clean = (out_dir / "notes.csv").read_text(encoding="utf-8")
        assert "<br>" not in clean
        masks = (out_dir / "masks.csv").read_text(encoding="utf-8")
        assert "n1" in masks.splitlines()[1]
        report = json.loads((out_dir / "report.json").read_text())
        assert report["notes"] == 1
        assert report["masked_ranges"] == 1
        # "of pain" shifted left by the removed tag width.
        preds = read_predictions(out_dir / "annotations.csv")
        assert preds == [("n1", 11, 15, "C1")]

    def test_missing_file_is_validation_failure(self, tmp_path):
        assert run(["preprocess", "--notes", tmp_path / "nope.csv", "--out-dir", tmp_path]) == 1

    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            run(["preprocess", "--bogus", "x"])
        assert exc.value.code == 2


class TestBuildDictionaryCommand:
    def test_build(self, tmp_path, fixture_corpus):
        out = tmp_path / "dict.tsv"
        assert run(
            [
                "build-dictionary",
                "--notes", fixture_corpus["notes"],
                "--annotations", fixture_corpus["gold"],
                "--out", out,
            ]
        ) == 0
        entries = dict(
            line.split("\t")[:2] for line in out.read_text().splitlines()
        )
        assert entries["chest pain"] == "C01"
        assert entries["liver"] == "C07"


class TestBuildIndexCommand:
    def test_validate_and_normalize(self, tmp_path):
        raw = tmp_path / "raw.emb"
        norm = tmp_path / "norm.emb"
        store.write_store([("a", np.array([3.0, 4.0]))], raw)
        assert run(["build-index", "--input", raw, "--output", norm]) == 0
        loaded = store.load_store(norm)
        assert loaded.rescaled_count == 0
        assert loaded.vectors[0] == pytest.approx([0.6, 0.8], abs=1e-6)

    def test_bad_file_fails(self, tmp_path):
        bad = tmp_path / "bad.emb"
        bad.write_bytes(b"garbage!")
        assert run(["build-index", "--input", bad, "--output", tmp_path / "o.emb"]) == 1


class TestLinkAndEvaluate:
    def test_identity_geometry_gives_perfect_miou(self, tmp_path, fixture_corpus):
        preds = tmp_path / "pred.csv"
        assert run(link_args(fixture_corpus, preds, ["--dictionary-mode", "off"])) == 0
        gold = read_predictions(fixture_corpus["gold"])
        assert sorted(read_predictions(preds)) == sorted(gold)

        report_path = tmp_path / "eval.json"
        assert run(
            [
                "evaluate",
                "--pred", preds,
                "--gold", fixture_corpus["gold"],
                "--notes", fixture_corpus["notes"],
                "--out", report_path,
            ]
        ) == 0
        report = json.loads(report_path.read_text())
        assert report["macro_iou"] == 1.0

    def test_no_class_filter_still_perfect_on_identity(self, tmp_path, fixture_corpus):
        preds = tmp_path / "pred.csv"
        assert run(
            link_args(
                fixture_corpus, preds, ["--dictionary-mode", "off", "--no-class-filter"]
            )
        ) == 0
        assert sorted(read_predictions(preds)) == sorted(
            read_predictions(fixture_corpus["gold"])
        )

    def test_dictionary_override_dominates(self, tmp_path):
        paths = write_fixture_corpus(tmp_path, redirect={"chest pain": "C03"})
        preds = tmp_path / "pred.csv"
        assert run(
            link_args(
                paths,
                preds,
                ["--dict", paths["dict"], "--dictionary-mode", "override"],
            )
        ) == 0
        rows = read_predictions(preds)
        chest_spans = [
            (nid, surface) for nid, surface, cid in FIXTURE_MENTIONS if cid == "C01"
        ]
        redirected = [r for r in rows if r[3] == "C03"]
        # Both chest-pain occurrences plus the two genuine headache spans.
        assert len(redirected) == len(chest_spans) + 2

    def test_rerank_passthrough_equivalence(self, tmp_path, fixture_corpus):
        p1, p2 = tmp_path / "p1.csv", tmp_path / "p2.csv"
        assert run(link_args(fixture_corpus, p1, ["--dictionary-mode", "off"])) == 0
        # Rerank in the same embedding space cannot change an identity-
        # geometry result.
        assert run(
            link_args(
                fixture_corpus,
                p2,
                [
                    "--dictionary-mode", "off",
                    "--rerank", fixture_corpus["mention_emb"], fixture_corpus["concept_emb"],
                ],
            )
        ) == 0
        assert read_predictions(p1) == read_predictions(p2)

    def test_candidates_out_and_hit_metrics(self, tmp_path, fixture_corpus):
        preds = tmp_path / "pred.csv"
        cands = tmp_path / "cands.jsonl"
        assert run(
            link_args(
                fixture_corpus,
                preds,
                ["--dictionary-mode", "off", "--candidates-out", cands],
            )
        ) == 0
        report_path = tmp_path / "eval.json"
        assert run(
            [
                "evaluate",
                "--pred", preds,
                "--gold", fixture_corpus["gold"],
                "--notes", fixture_corpus["notes"],
                "--candidates", cands,
                "--out", report_path,
            ]
        ) == 0
        report = json.loads(report_path.read_text())
        assert report["candidates"]["hit_at_1"] == 1.0
        assert report["candidates"]["hit_at_5"] == 1.0
        assert report["candidates"]["mean_best_cosine_at_5"] == pytest.approx(1.0, abs=1e-6)

    def test_link_report(self, tmp_path, fixture_corpus):
        preds = tmp_path / "pred.csv"
        report_path = tmp_path / "link.json"
        assert run(
            link_args(
                fixture_corpus,
                preds,
                ["--dictionary-mode", "off", "--report", report_path],
            )
        ) == 0
        report = json.loads(report_path.read_text())
        assert report["notes_processed"] == 5
        assert report["spans_decoded"] == 12
        assert report["predictions"] == 12
        assert report["by_source"]["Embedding"] == 12

    def test_determinism_byte_identical(self, tmp_path, fixture_corpus):
        outs = []
        for i in (1, 2):
            preds = tmp_path / f"pred{i}.csv"
            report = tmp_path / f"report{i}.json"
            assert run(
                link_args(
                    fixture_corpus,
                    preds,
                    ["--dictionary-mode", "off", "--report", report],
                )
            ) == 0
            outs.append((preds.read_bytes(), report.read_bytes()))
        assert outs[0] == outs[1]
