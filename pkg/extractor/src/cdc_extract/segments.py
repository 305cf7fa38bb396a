"""Word-piece segment planning for long documents.

Encoders cap their input length, so a document's word pieces are split into
non-overlapping windows of at most `max_pieces` pieces. A window boundary
that would land inside one corpus token's pieces is shifted backward to the
previous token boundary, keeping every token's pieces inside one window.
Special tokens an encoder adds per window are the encoder's business and
never appear in the plan; callers shrink `max_pieces` by the encoder's
reservation instead.
"""

from __future__ import annotations

from dataclasses import dataclass

MAX_PIECES = 512


class SegmentError(ValueError):
    """A document cannot be segmented under the piece limit."""


@dataclass(frozen=True)
class Segment:
    """Half-open token and piece ranges of one window."""

    token_start: int
    token_end: int
    piece_start: int
    piece_end: int

    @property
    def n_pieces(self) -> int:
        return self.piece_end - self.piece_start


@dataclass(frozen=True)
class SegmentPlan:
    doc_id: str
    pieces_per_token: tuple[int, ...]
    segments: tuple[Segment, ...]

    @property
    def n_tokens(self) -> int:
        return len(self.pieces_per_token)

    @property
    def n_pieces(self) -> int:
        return sum(self.pieces_per_token)


def plan_segments(doc_id: str, pieces_per_token: list[int],
                  max_pieces: int = MAX_PIECES) -> SegmentPlan:
    """Greedy left-to-right planning; boundaries only at token boundaries."""
    if max_pieces < 1:
        raise SegmentError(f"max_pieces must be positive, got {max_pieces}")
    for index, count in enumerate(pieces_per_token):
        if count < 1:
            raise SegmentError(
                f"{doc_id}: token {index} produced no word pieces")
        if count > max_pieces:
            raise SegmentError(
                f"{doc_id}: token {index} alone has {count} pieces, "
                f"over the {max_pieces}-piece window limit")
    segments = []
    token_start = piece_start = 0
    filled = 0
    for index, count in enumerate(pieces_per_token):
        if filled and filled + count > max_pieces:
            segments.append(Segment(token_start, index,
                                    piece_start, piece_start + filled))
            token_start = index
            piece_start += filled
            filled = 0
        filled += count
    if filled:
        segments.append(Segment(token_start, len(pieces_per_token),
                                piece_start, piece_start + filled))
    return SegmentPlan(doc_id, tuple(pieces_per_token), tuple(segments))


def check_plan(plan: SegmentPlan, max_pieces: int = MAX_PIECES) -> None:
    """Assert the planning invariants; used by tests and extraction."""
    expected_token = expected_piece = 0
    for seg in plan.segments:
        if seg.token_start != expected_token or seg.piece_start != expected_piece:
            raise SegmentError(f"{plan.doc_id}: windows do not tile the document")
        if seg.n_pieces > max_pieces:
            raise SegmentError(f"{plan.doc_id}: window of {seg.n_pieces} pieces "
                               f"exceeds the limit {max_pieces}")
        span = plan.pieces_per_token[seg.token_start:seg.token_end]
        if sum(span) != seg.n_pieces:
            raise SegmentError(f"{plan.doc_id}: window splits a token's pieces")
        expected_token = seg.token_end
        expected_piece = seg.piece_end
    if expected_token != plan.n_tokens or expected_piece != plan.n_pieces:
        raise SegmentError(f"{plan.doc_id}: windows do not cover the document")
