"""Command line front end for the export tool.

Subcommands: concepts, mentions, token-labels. Each writes its artifact
plus a `<artifact>.manifest.json` recording model, pooling, dimension,
timestamp, and input digest.
"""

from __future__ import annotations

import argparse
import sys

from . import exporter


def cmd_concepts(args) -> int:
    pairs = exporter.read_concepts(args.input)
    encoder = exporter.SentenceEncoder(args.model, pooling=args.pooling)
    manifest = exporter.export_embeddings(
        pairs, encoder, args.out, args.input, batch_size=args.batch_size
    )
    manifest.write(args.out + ".manifest.json")
    print(f"{len(pairs)} concepts, dim {manifest.dim} -> {args.out}")
    return 0


def cmd_mentions(args) -> int:
    pairs = exporter.read_surfaces(args.input)
    encoder = exporter.SentenceEncoder(args.model, pooling=args.pooling)
    manifest = exporter.export_embeddings(
        pairs, encoder, args.out, args.input, batch_size=args.batch_size
    )
    manifest.write(args.out + ".manifest.json")
    print(f"{len(pairs)} surfaces, dim {manifest.dim} -> {args.out}")
    return 0


def cmd_token_labels(args) -> int:
    labeler = exporter.TokenLabeler(args.model)
    manifest = exporter.export_token_labels(args.notes, labeler, args.out)
    manifest.write(args.out + ".manifest.json")
    print(f"token labels -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snolink-export",
        description="Export embeddings and token labels for the linking engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--model", required=True, help="model id or local path")
        p.add_argument(
            "--pooling",
            choices=[exporter.POOL_MEAN_TOKEN, exporter.POOL_CLS],
            default=exporter.POOL_MEAN_TOKEN,
        )
        p.add_argument("--batch-size", type=int, default=32)

    p = sub.add_parser("concepts", help="encode concept canonical terms")
    p.add_argument("--input", required=True, help="concepts.tsv")
    p.add_argument("--out", required=True, help="output .emb path")
    add_common(p)
    p.set_defaults(func=cmd_concepts)

    p = sub.add_parser("mentions", help="encode mention surfaces")
    p.add_argument("--input", required=True, help="one surface per line")
    p.add_argument("--out", required=True, help="output .emb path")
    add_common(p)
    p.set_defaults(func=cmd_mentions)

    p = sub.add_parser("token-labels", help="run token classification over notes")
    p.add_argument("--notes", required=True, help="notes.csv")
    p.add_argument("--out", required=True, help="output tokens.jsonl path")
    p.add_argument("--model", required=True, help="token classification model")
    p.add_argument("--batch-size", type=int, default=8)
    p.set_defaults(func=cmd_token_labels)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (exporter.ExportError, OSError, ValueError) as exc:
        print(f"snolink-export: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
