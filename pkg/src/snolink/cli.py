"""Command line front end.

Subcommands: preprocess, build-dictionary, build-index, link, evaluate.
Exit codes: 0 success, 1 validation failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from importlib import resources
from pathlib import Path

from . import corpus, dictionary, metrics, pipeline, preprocess, store

_ERRORS = (
    corpus.CorpusError,
    store.StoreError,
    metrics.MetricError,
    pipeline.PipelineError,
    ValueError,
    OSError,
)


def _default_headers() -> list[str]:
    text = (
        resources.files("snolink").joinpath("data/excluded_headers.txt").read_text("utf-8")
    )
    return [line for line in text.splitlines() if line.strip()]


def _read_headers(path: str | None) -> list[str]:
    if path is None:
        return _default_headers()
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh if line.strip()]


def _json_dump(obj, path: str | None) -> None:
    payload = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if path is None:
        sys.stdout.write(payload)
    else:
        Path(path).write_text(payload, encoding="utf-8")


def cmd_preprocess(args) -> int:
    notes = corpus.load_notes(args.notes)
    headers = _read_headers(args.headers)
    tags = args.markup_tag or list(preprocess.DEFAULT_MARKUP)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    anns = None
    if args.annotations:
        anns = corpus.load_annotations(args.annotations, notes)

    clean_notes = corpus.NoteSet()
    kept_anns: list[corpus.Annotation] = []
    dropped: list[corpus.Annotation] = []
    masks: list[preprocess.ExclusionMask] = []
    for note in notes:
        clean_text, offset_map = preprocess.strip_markup(note.text, tags)
        clean_note = corpus.Note(note.note_id, clean_text)
        clean_notes.add(clean_note)
        masks.append(preprocess.mask_sections(clean_note, headers))
        if anns is not None:
            note_anns = corpus.AnnotationSet(anns.for_note(note.note_id))
            remapped, note_dropped = preprocess.remap_annotations(note_anns, offset_map)
            kept_anns.extend(remapped)
            dropped.extend(note_dropped)

    corpus.save_notes(clean_notes, out_dir / "notes.csv")
    with open(out_dir / "masks.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["note_id", "start", "end"])
        for mask in masks:
            for begin, end in mask.ranges:
                writer.writerow([mask.note_id, begin, end])

    report: dict = {
        "notes": len(notes),
        "masked_ranges": sum(len(m.ranges) for m in masks),
    }
    if anns is not None:
        corpus.save_annotations(kept_anns, out_dir / "annotations.csv")
        validation = preprocess.validate_annotations(kept_anns, clean_notes)
        report.update(
            {
                "annotations_loaded": len(anns),
                "annotations_rejected": [
                    {"line": r.line_no, "note_id": r.note_id, "reason": r.reason}
                    for r in anns.rejected
                ],
                "annotations_dropped_by_markup": [
                    {"note_id": a.note_id, "start": a.start, "end": a.end}
                    for a in dropped
                ],
                "suspect_shifts": [
                    {
                        "note_id": e.annotation.note_id,
                        "start": e.annotation.start,
                        "end": e.annotation.end,
                    }
                    for e in validation
                    if e.status == "suspect shift"
                ],
            }
        )
    _json_dump(report, str(out_dir / "report.json"))
    return 0


def cmd_build_dictionary(args) -> int:
    notes = corpus.load_notes(args.notes)
    anns = corpus.load_annotations(args.annotations, notes)
    built = dictionary.build_dictionary(anns, notes, min_count=args.min_count)
    dictionary.save_dictionary(built, args.out)
    print(f"{len(built)} entries -> {args.out}")
    return 0


def cmd_build_index(args) -> int:
    loaded = store.load_store(args.input)
    store.write_store(list(zip(loaded.ids, loaded.vectors)), args.output)
    print(
        f"{len(loaded)} vectors, dim {loaded.dim}, "
        f"{loaded.rescaled_count} rescaled -> {args.output}"
    )
    return 0


def cmd_link(args) -> int:
    notes = corpus.load_notes(args.notes)
    catalog = corpus.load_concepts(args.concepts)
    concept_store = store.load_store(args.concept_emb)
    mention_store = store.load_store(args.mention_emb)
    dict_obj = dictionary.load_dictionary(args.dict) if args.dict else None
    cfg = pipeline.PipelineConfig(
        top_k=args.top_k,
        dictionary_mode=args.dictionary_mode,
        class_filter=args.class_filter,
    )
    if cfg.dictionary_mode != pipeline.DICT_OFF and dict_obj is None:
        print("link: --dict required unless --dictionary-mode off", file=sys.stderr)
        return 1
    rerank_query = rerank_doc = None
    if args.rerank:
        rerank_query = store.load_store(args.rerank[0])
        rerank_doc = store.load_store(args.rerank[1])
    sub_stores = (
        pipeline.class_sub_stores(concept_store, catalog) if cfg.class_filter else None
    )

    report = pipeline.LinkReport()
    predictions: list[pipeline.Prediction] = []
    candidates: list[pipeline.SpanCandidates] = []
    with open(args.tokens, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            note_id, tokens, labels, _scores = pipeline.parse_stage1_record(line)
            note = notes.get(note_id)
            if note is None:
                raise pipeline.PipelineError(f"stage-1 record for unknown note {note_id}")
            note_preds, note_cands = pipeline.link_note(
                note,
                tokens,
                labels,
                mention_store,
                concept_store,
                dict_obj,
                cfg,
                sub_stores=sub_stores,
                rerank_query_store=rerank_query,
                rerank_doc_store=rerank_doc,
                report=report,
            )
            predictions.extend(note_preds)
            candidates.extend(note_cands)

    corpus.save_annotations(
        [
            corpus.Annotation(p.note_id, p.start, p.end, p.concept_id)
            for p in predictions
        ],
        args.out,
    )
    if args.candidates_out:
        with open(args.candidates_out, "w", encoding="utf-8") as fh:
            pipeline.write_candidates_jsonl(candidates, fh)
    if args.report:
        payload = report.to_dict()
        payload["predictions"] = len(predictions)
        payload["by_source"] = {
            src: sum(1 for p in predictions if p.source == src)
            for src in (pipeline.SOURCE_DICTIONARY, pipeline.SOURCE_EMBEDDING)
        }
        _json_dump(payload, args.report)
    return 0


def _load_candidate_lists(path):
    mentions = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            mentions.append(
                (
                    (obj["note_id"], obj["start"], obj["end"]),
                    [
                        store.Candidate(c["concept_id"], c["score"])
                        for c in obj["candidates"]
                    ],
                )
            )
    return mentions


def cmd_evaluate(args) -> int:
    notes = corpus.load_notes(args.notes)
    gold = corpus.load_annotations(args.gold, notes)
    pred = corpus.load_annotations(args.pred, notes)
    iou = metrics.macro_iou(pred, gold)
    report = {
        "macro_iou": iou.macro,
        "per_class_iou": {str(k): v for k, v in iou.per_class.items()},
        "gold_annotations": len(gold),
        "pred_annotations": len(pred),
        "gold_rejected": len(gold.rejected),
        "pred_rejected": len(pred.rejected),
    }
    if args.candidates:
        gold_by_span = {(a.note_id, a.start, a.end): a.concept_id for a in gold}
        mentions = _load_candidate_lists(args.candidates)
        scored = [
            (gold_by_span[span], cands)
            for span, cands in mentions
            if span in gold_by_span
        ]
        if scored:
            report["candidates"] = {
                "mentions_with_gold_span": len(scored),
                "hit_at_1": metrics.mean_hit_rate(scored, 1),
                "hit_at_5": metrics.mean_hit_rate(scored, 5),
                "mean_best_cosine_at_5": metrics.mean_best_cosine(
                    [cands for _, cands in scored], 5
                ),
            }
        else:
            report["candidates"] = {"mentions_with_gold_span": 0}
    _json_dump(report, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snolink",
        description="Clinical entity linking pipeline engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="clean notes, remap annotations, emit section masks")
    p.add_argument("--notes", required=True)
    p.add_argument("--annotations")
    p.add_argument("--headers", help="file with one excluded-section header per line")
    p.add_argument(
        "--markup-tag",
        action="append",
        help="markup artifact to replace with a space (repeatable; default set)",
    )
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("build-dictionary", help="build the surface-form dictionary")
    p.add_argument("--notes", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_dictionary)

    p = sub.add_parser("build-index", help="validate and normalize an .emb file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("link", help="link stage-1 spans to concepts")
    p.add_argument("--notes", required=True)
    p.add_argument("--tokens", required=True, help="stage-1 tokens.jsonl")
    p.add_argument("--concepts", required=True, help="concepts.tsv catalog")
    p.add_argument("--concept-emb", required=True)
    p.add_argument("--mention-emb", required=True)
    p.add_argument("--dict")
    p.add_argument(
        "--dictionary-mode",
        choices=[pipeline.DICT_OVERRIDE, pipeline.DICT_SUPPLEMENT, pipeline.DICT_OFF],
        default=pipeline.DICT_OVERRIDE,
    )
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument(
        "--class-filter",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="restrict retrieval to concepts of the span's predicted class",
    )
    p.add_argument(
        "--rerank",
        nargs=2,
        metavar=("QUERY_EMB", "DOC_EMB"),
        help="rerank-space stores; absent selects pass-through",
    )
    p.add_argument("--out", required=True, help="predictions.csv")
    p.add_argument("--report", help="report.json path")
    p.add_argument("--candidates-out", help="per-span candidate lists (jsonl)")
    p.set_defaults(func=cmd_link)

    p = sub.add_parser("evaluate", help="score predictions against gold annotations")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--notes", required=True)
    p.add_argument("--candidates", help="candidate lists from link --candidates-out")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _ERRORS as exc:
        print(f"snolink: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
