"""Span candidate enumeration, representation, scoring, and pruning.

A span's representation is the concatenation of its first token vector, its
last token vector, an attention-weighted sum of its token vectors, and a
learned width-bucket embedding:

    g = [x_first, x_last, x_hat, phi(width)]

Attention logits come from a single linear projection of each token vector;
the weights are a softmax over the span. All pieces are trainable except the
token embeddings, which stay frozen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .corpus import Document, GoldMention
from .embeddings import EmbeddingStore

WIDTH_DIM = 20


@dataclass
class SpanCandidate:
    doc_id: str
    start: int
    end: int  # inclusive
    g: np.ndarray | None = field(default=None, repr=False)
    mention_score: float = 0.0

    @property
    def width(self) -> int:
        return self.end - self.start + 1

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.doc_id, self.start, self.end)


def init_span_params(params: dict, dim: int, max_span_width: int, hidden: int,
                     rng: np.random.Generator, width_dim: int = WIDTH_DIM) -> None:
    """Attention projection, width table, and FFNN_m over 3*dim+width_dim."""
    params["span.att.W"] = nn.xavier_init((1, dim), rng)
    params["span.att.b"] = np.zeros(1, dtype=np.float64)
    params["span.width"] = nn.xavier_init((max_span_width, width_dim), rng)
    nn.init_ffnn(params, "span.ffnn_m", 3 * dim + width_dim, hidden, rng)


def span_param_names(params: dict) -> list[str]:
    return [k for k in params if k.startswith("span.")]


def mention_scorer_names(params: dict) -> list[str]:
    return [k for k in params if k.startswith("span.ffnn_m.")]


def g_dim(dim: int, width_dim: int = WIDTH_DIM) -> int:
    return 3 * dim + width_dim


def enumerate_spans(document: Document, max_span_width: int) -> list[tuple[int, int]]:
    """All sentence-internal spans of width 1..max_span_width, by (start, end)."""
    out = []
    for s_start, s_end in document.sentence_spans:
        for start in range(s_start, s_end + 1):
            stop = min(start + max_span_width - 1, s_end)
            for end in range(start, stop + 1):
                out.append((start, end))
    out.sort()
    return out


def keep_count(lam: float, t: int) -> int:
    """ceil(lam*T) with a tiny guard against float excess (0.35*20 = 7+eps)."""
    return max(int(math.ceil(lam * t - 1e-9)), 0)


def prune_spans(candidates: list[SpanCandidate], lam: float,
                t: int) -> list[SpanCandidate]:
    """Keep the ceil(lam*T) highest-scoring spans of one document.

    Ties broken by (start, end) ascending; result re-sorted by (start, end).
    """
    k = min(keep_count(lam, t), len(candidates))
    ranked = sorted(candidates, key=lambda c: (-c.mention_score, c.start, c.end))
    kept = ranked[:k]
    kept.sort(key=lambda c: (c.start, c.end))
    return kept


def gold_span_candidates(document: Document,
                         gold: list[GoldMention]) -> list[SpanCandidate]:
    """One candidate per gold mention; no enumeration, no pruning."""
    out = []
    for m in gold:
        if m.doc_id != document.doc_id:
            raise ValueError(f"mention {m.key} is not in {document.doc_id!r}")
        if m.end >= document.n_tokens:
            raise ValueError(f"gold mention {m.key} outside document range")
        out.append(SpanCandidate(m.doc_id, m.start, m.end))
    out.sort(key=lambda c: (c.start, c.end))
    return out


class SpanBatch:
    """Representations of a list of spans, with an exact backward pass.

    Spans may come from different documents. Internally spans are grouped
    by (doc_id, width) so attention can be computed with batched matmuls.
    The forward pass caches everything backward needs; backward accumulates
    gradients for the attention projection, the width table, and (via the
    returned per-row gradient) whatever consumed g.
    """

    def __init__(self, params: dict, spans: list[tuple[str, int, int]],
                 store: EmbeddingStore):
        self.spans = list(spans)
        self.n = len(spans)
        dim = store.dim
        width_dim = params["span.width"].shape[1]
        self.g = np.zeros((self.n, 3 * dim + width_dim), dtype=np.float64)
        self._groups = []
        if self.n == 0:
            return
        w_att = params["span.att.W"][0]
        b_att = params["span.att.b"][0]
        width_table = params["span.width"]
        by_shape: dict[tuple[str, int], list[int]] = {}
        for idx, (doc_id, start, end) in enumerate(spans):
            by_shape.setdefault((doc_id, end - start + 1), []).append(idx)
        self._width_shape = width_table.shape
        for (doc_id, width), idxs in by_shape.items():
            mat = store.matrix(doc_id)
            starts = np.array([spans[i][1] for i in idxs])
            gather = starts[:, None] + np.arange(width)[None, :]
            x = mat[gather].astype(np.float64)  # (k, w, D)
            logits = x @ w_att + b_att  # (k, w)
            logits -= logits.max(axis=1, keepdims=True)
            expl = np.exp(logits)
            att = expl / expl.sum(axis=1, keepdims=True)  # (k, w)
            x_hat = np.einsum("kwd,kw->kd", x, att)
            bucket = min(width, width_table.shape[0]) - 1
            rows = np.array(idxs)
            self.g[rows, :dim] = x[:, 0, :]
            self.g[rows, dim:2 * dim] = x[:, -1, :]
            self.g[rows, 2 * dim:3 * dim] = x_hat
            self.g[rows, 3 * dim:] = width_table[bucket]
            self._groups.append((rows, x, att, bucket))
        self._dim = dim

    def backward(self, dg: np.ndarray, grads: dict) -> None:
        """Accumulate d(loss)/d(params) given d(loss)/d(g) rows."""
        if dg.shape != self.g.shape:
            raise ValueError(f"dg shape {dg.shape} != g shape {self.g.shape}")
        if self.n == 0:
            return
        dim = self._dim
        if "span.width" not in grads:
            grads["span.width"] = np.zeros(self._width_shape)
        for rows, x, att, bucket in self._groups:
            dxh = dg[rows, 2 * dim:3 * dim]  # (k, D)
            # softmax backward: dlogit = a * (da - sum(a*da))
            da = np.einsum("kwd,kd->kw", x, dxh)
            inner = (att * da).sum(axis=1, keepdims=True)
            dlogits = att * (da - inner)  # (k, w)
            nn._accumulate(grads, "span.att.W",
                           np.einsum("kw,kwd->d", dlogits, x)[None, :])
            nn._accumulate(grads, "span.att.b", np.array([dlogits.sum()]))
            grads["span.width"][bucket] += dg[rows, 3 * dim:].sum(axis=0)

    def mention_scores(self, params: dict, *, training: bool = False,
                       dropout: float = 0.0,
                       rng: np.random.Generator | None = None):
        scores, cache = nn.ffnn_forward(params, "span.ffnn_m", self.g,
                                        training=training, dropout=dropout,
                                        rng=rng)
        return scores, cache


def represent_spans(params: dict, spans: list[tuple[str, int, int]],
                    store: EmbeddingStore) -> SpanBatch:
    return SpanBatch(params, spans, store)
