"""Run a frozen encoder over a corpus and emit one vector per token.

For each document: tokenize every corpus token into word pieces, plan
non-overlapping windows under the encoder's piece budget, encode each
window independently, then mean-pool each token's piece vectors. Output
rows follow corpus token order, one row per token, written in corpus
document order so reruns are byte-identical.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .cdce import write_cdce
from .corpus_io import DocumentTokens, load_document_tokens
from .segments import MAX_PIECES, check_plan, plan_segments


class ExtractError(RuntimeError):
    """Extraction cannot proceed for a specific document or token."""


def document_pieces(doc: DocumentTokens, encoder) -> list[list[str]]:
    """Word pieces per corpus token, in flat token order."""
    pieces: list[list[str]] = []
    for sentence in doc.sentences:
        for position, token in enumerate(sentence):
            got = encoder.pieces(token, sentence_initial=(position == 0))
            if not got:
                raise ExtractError(
                    f"{doc.doc_id}: token {len(pieces)} ({token!r}) "
                    f"produced no word pieces")
            pieces.append(list(got))
    return pieces


def extract_document(doc: DocumentTokens, encoder,
                     max_pieces: int = MAX_PIECES) -> np.ndarray:
    """(n_tokens, dim) float32 embeddings for one document."""
    budget = max_pieces - encoder.reserved_pieces
    token_pieces = document_pieces(doc, encoder)
    plan = plan_segments(doc.doc_id, [len(p) for p in token_pieces],
                         budget)
    check_plan(plan, budget)
    flat = [piece for pieces in token_pieces for piece in pieces]
    out = np.empty((len(token_pieces), encoder.dim), dtype=np.float32)
    for seg in plan.segments:
        vectors = encoder.encode_segment(flat[seg.piece_start:seg.piece_end])
        if vectors.shape != (seg.n_pieces, encoder.dim):
            raise ExtractError(
                f"{doc.doc_id}: encoder returned shape {vectors.shape} "
                f"for a {seg.n_pieces}-piece window")
        cursor = 0
        for token_index in range(seg.token_start, seg.token_end):
            width = len(token_pieces[token_index])
            pooled = vectors[cursor:cursor + width].mean(axis=0)
            out[token_index] = pooled.astype(np.float32)
            cursor += width
    return out


def extract_corpus(corpus_path: str | Path, encoder, out_path: str | Path,
                   max_pieces: int = MAX_PIECES) -> dict[str, int]:
    """Extract every document; returns doc_id -> token count."""
    documents = load_document_tokens(corpus_path)
    matrices = {doc.doc_id: extract_document(doc, encoder, max_pieces)
                for doc in documents}
    write_cdce(out_path, matrices)
    return {doc_id: mat.shape[0] for doc_id, mat in matrices.items()}
