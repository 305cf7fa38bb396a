"""Pairwise mention scoring and training-pair assembly.

The pair score in full mode is s(i,j) = s_m(i) + s_m(j) + s_a(i,j); in gold
mode the mention scores are ignored and s(i,j) = s_a(i,j). The pair scorer
s_a is a one-hidden-layer FFNN over [g_a, g_b, g_a * g_b] (elementwise
product). Pairs are always evaluated once, in canonical order: the member
with the smaller (document position, start, end) triple comes first.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nn
from .spans import SpanCandidate

SCORE_MODES = ("full", "gold")


@dataclass
class MentionPair:
    a: SpanCandidate
    b: SpanCandidate
    ai: int  # indices into the canonical candidate list
    bi: int
    label: int = 0
    score: float = 0.0


def init_pair_params(params: dict, g_width: int, hidden: int,
                     rng: np.random.Generator) -> None:
    nn.init_ffnn(params, "pair.ffnn_a", 3 * g_width, hidden, rng)


def canonical_sort(candidates: list[SpanCandidate],
                   doc_pos: dict[str, int]) -> list[SpanCandidate]:
    """Order candidates by (document position, start, end)."""
    return sorted(candidates, key=lambda c: (doc_pos[c.doc_id], c.start, c.end))


def pair_features(g_a: np.ndarray, g_b: np.ndarray) -> np.ndarray:
    return np.concatenate([g_a, g_b, g_a * g_b])


def pair_feature_batch(g: np.ndarray, ai: np.ndarray,
                       bi: np.ndarray) -> np.ndarray:
    ga = g[ai]
    gb = g[bi]
    return np.concatenate([ga, gb, ga * gb], axis=1)


def pair_logit_batch(params: dict, g: np.ndarray, ai: np.ndarray,
                     bi: np.ndarray, mention_scores: np.ndarray | None,
                     mode: str, *, training: bool = False,
                     dropout: float = 0.0,
                     rng: np.random.Generator | None = None):
    """Scores for index pairs (ai[k], bi[k]) over representation rows g.

    Returns (logits, cache). In full mode `mention_scores` must hold s_m for
    every row of g; in gold mode it is ignored.
    """
    if mode not in SCORE_MODES:
        raise ValueError(f"unknown scoring mode {mode!r}")
    x = pair_feature_batch(g, ai, bi)
    s_a, ffnn_cache = nn.ffnn_forward(params, "pair.ffnn_a", x,
                                      training=training, dropout=dropout,
                                      rng=rng)
    if mode == "full":
        if mention_scores is None:
            raise ValueError("full mode needs mention scores")
        logits = s_a + mention_scores[ai] + mention_scores[bi]
    else:
        logits = s_a
    cache = (ffnn_cache, ai, bi, g.shape, mode)
    return logits, cache


def pair_logit_backward(params: dict, cache, dlogits: np.ndarray,
                        grads: dict):
    """Backprop through s_a (and the additive s_m terms in full mode).

    Returns (dg, d_mention_scores): gradient w.r.t. the representation rows
    and w.r.t. the per-candidate mention scores (zeros in gold mode).
    """
    ffnn_cache, ai, bi, g_shape, mode = cache
    dx = nn.ffnn_backward(params, "pair.ffnn_a", ffnn_cache, dlogits, grads)
    f = g_shape[1]
    ga = ffnn_cache[0][:, :f]
    gb = ffnn_cache[0][:, f:2 * f]
    dga = dx[:, :f] + dx[:, 2 * f:] * gb
    dgb = dx[:, f:2 * f] + dx[:, 2 * f:] * ga
    dg = np.zeros(g_shape, dtype=np.float64)
    np.add.at(dg, ai, dga)
    np.add.at(dg, bi, dgb)
    dsm = np.zeros(g_shape[0], dtype=np.float64)
    if mode == "full":
        np.add.at(dsm, ai, dlogits)
        np.add.at(dsm, bi, dlogits)
    return dg, dsm


def pair_score(a: SpanCandidate, b: SpanCandidate, params: dict,
               mode: str) -> float:
    """Single-pair convenience wrapper; pair must be in canonical order."""
    if a.g is None or b.g is None:
        raise ValueError("candidates need representations before scoring")
    g = np.stack([a.g, b.g])
    sm = np.array([a.mention_score, b.mention_score])
    logits, _ = pair_logit_batch(params, g, np.array([0]), np.array([1]),
                                 sm, mode)
    return float(logits[0])


def all_pair_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """All unordered index pairs i < j, row-major order."""
    iu = np.triu_indices(n, k=1)
    return iu[0], iu[1]


def score_all_pairs(params: dict, g: np.ndarray,
                    mention_scores: np.ndarray | None, mode: str,
                    chunk: int = 4096) -> np.ndarray:
    """Symmetric raw-score matrix over all unordered pairs; diagonal 0."""
    n = g.shape[0]
    table = np.zeros((n, n), dtype=np.float64)
    if n < 2:
        return table
    ai, bi = all_pair_indices(n)
    for lo in range(0, ai.size, chunk):
        sl = slice(lo, lo + chunk)
        logits, _ = pair_logit_batch(params, g, ai[sl], bi[sl],
                                     mention_scores, mode)
        table[ai[sl], bi[sl]] = logits
        table[bi[sl], ai[sl]] = logits
    return table


def build_training_pairs(candidates: list[SpanCandidate],
                         cluster_of: dict[tuple[str, int, int], str],
                         neg_ratio: float | None,
                         rng: np.random.Generator) -> list[MentionPair]:
    """Label all candidate pairs against gold clusters and sample negatives.

    `candidates` must already be in canonical order. Positives are pairs
    whose exact spans both match gold mentions sharing a cluster id.
    Negatives are a uniform sample without replacement of size
    min(neg_ratio * positives, available); neg_ratio None keeps them all.
    """
    n = len(candidates)
    keys = [c.key for c in candidates]
    cids = [cluster_of.get(k) for k in keys]
    positives: list[tuple[int, int]] = []
    negatives: list[tuple[int, int]] = []
    for i in range(n):
        ci = cids[i]
        for j in range(i + 1, n):
            if ci is not None and ci == cids[j]:
                positives.append((i, j))
            else:
                negatives.append((i, j))
    if neg_ratio is not None and negatives:
        want = min(int(neg_ratio * len(positives)), len(negatives))
        picked = rng.choice(len(negatives), size=want, replace=False)
        negatives = [negatives[k] for k in sorted(picked)]
    out = [MentionPair(candidates[i], candidates[j], i, j, label=1)
           for i, j in positives]
    out += [MentionPair(candidates[i], candidates[j], i, j, label=0)
            for i, j in negatives]
    return out


def write_pair_scores(path: str | Path, candidates: list[SpanCandidate],
                      raw_scores: np.ndarray) -> None:
    """Debug CSV of every scored pair with raw score and probability."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["doc_a", "start_a", "end_a", "doc_b", "start_b",
                         "end_b", "raw_score", "probability"])
        n = len(candidates)
        for i in range(n):
            for j in range(i + 1, n):
                a, b = candidates[i], candidates[j]
                raw = raw_scores[i, j]
                writer.writerow([a.doc_id, a.start, a.end,
                                 b.doc_id, b.start, b.end,
                                 f"{raw:.10g}", f"{float(nn.sigmoid(raw)):.10g}"])
