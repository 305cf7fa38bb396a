"""Command-line interface: `extract` and `convert`.

Exit codes: 0 success, 1 internal error, 2 input error.
"""

from __future__ import annotations

import argparse
import sys
import traceback
from pathlib import Path

from .cdce import CdceError
from .corpus_io import CorpusIoError, write_corpus_json
from .ecb import EcbError, convert_ecb_dir
from .encoders import EncoderError, get_encoder
from .extract import ExtractError, extract_corpus
from .segments import MAX_PIECES, SegmentError


class UserError(Exception):
    """Bad input: missing or malformed files and arguments."""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdc-extract",
        description="Frozen-encoder embeddings and ECB+ conversion for the "
                    "cross-document coreference engine's file formats.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="encode a corpus into a CDCE file")
    p.add_argument("--corpus", required=True, help="corpus JSON path")
    p.add_argument("--encoder", default="roberta-large",
                   help="HuggingFace model id, or stub[-<dim>] for the "
                        "deterministic test encoder")
    p.add_argument("--out", required=True, help="output .cdce path")
    p.add_argument("--max-pieces", type=int, default=MAX_PIECES,
                   help="window limit in word pieces, encoder input size")

    p = sub.add_parser("convert", help="convert ECB+ XML to corpus JSON")
    p.add_argument("--ecb-dir", required=True,
                   help="release directory containing numeric topic folders")
    p.add_argument("--out", required=True, help="output corpus JSON path")
    p.add_argument("--sentences-csv", default=None,
                   help="curated sentences CSV; omit to keep every sentence")
    p.add_argument("--topics", default=None,
                   help="comma-separated topic numbers to include")
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "extract":
        if not Path(args.corpus).exists():
            raise UserError(f"corpus file {args.corpus} not found")
        try:
            encoder = get_encoder(args.encoder)
            counts = extract_corpus(args.corpus, encoder, args.out,
                                    args.max_pieces)
        except (EncoderError, CorpusIoError, SegmentError, ExtractError,
                CdceError) as exc:
            raise UserError(str(exc)) from exc
        total = sum(counts.values())
        print(f"wrote {args.out}: {len(counts)} documents, {total} tokens, "
              f"dim {encoder.dim}")
        return 0
    if args.command == "convert":
        topics = None
        if args.topics:
            try:
                topics = [int(t) for t in args.topics.split(",") if t.strip()]
            except ValueError as exc:
                raise UserError(f"--topics: {exc}") from exc
        try:
            documents, mentions, splits = convert_ecb_dir(
                args.ecb_dir, args.sentences_csv, topics,
                warn=lambda message: print(f"warning: {message}",
                                           file=sys.stderr))
        except (EcbError, FileNotFoundError) as exc:
            raise UserError(str(exc)) from exc
        write_corpus_json(args.out, documents, mentions, splits)
        print(f"wrote {args.out}: {len(documents)} documents, "
              f"{len(mentions)} mentions, "
              f"splits {[f'{k}:{len(v)}' for k, v in splits.items()]}")
        return 0
    raise AssertionError(args.command)  # pragma: no cover


def main(argv: list[str] | None = None) -> int:
    try:
        return run(argv)
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
