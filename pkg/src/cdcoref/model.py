"""Model assembly: parameter initialization, batch loss/gradient steps,
candidate scoring, and binary checkpoints.

A model is a flat dict of float64 tensors (see `spans` and `pairs` for the
naming scheme) plus a small hyperparameter block. The two loss functions
here are the only places the full computation graph is wired end to end;
the trainer and the gradient tests both call them, so analytic gradients
are exercised exactly as trained.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nn, pairs, spans
from .embeddings import EmbeddingStore

MAGIC = b"CDCM"
VERSION = 1


@dataclass(frozen=True)
class HyperParams:
    dim: int
    max_span_width: int
    width_dim: int
    hidden: int


def init_model(hyper: HyperParams, rng: np.random.Generator) -> dict:
    params: dict[str, np.ndarray] = {}
    spans.init_span_params(params, hyper.dim, hyper.max_span_width,
                           hyper.hidden, rng, hyper.width_dim)
    g_width = 3 * hyper.dim + hyper.width_dim
    pairs.init_pair_params(params, g_width, hyper.hidden, rng)
    return params


def quantize_f32(params: dict) -> dict:
    """Round trip through float32, the checkpoint storage precision.

    Model selection evaluates quantized parameters so the score measured
    during training is exactly the score of the saved checkpoint.
    """
    return {k: v.astype(np.float32).astype(np.float64)
            for k, v in params.items()}


def span_batch_loss_and_grads(params: dict, store: EmbeddingStore,
                              span_keys: list[tuple[str, int, int]],
                              labels: np.ndarray, *, training: bool = False,
                              dropout: float = 0.0,
                              rng: np.random.Generator | None = None,
                              positive_only: bool = False):
    """BCE loss of the mention scorer over labeled spans, with gradients."""
    batch = spans.SpanBatch(params, span_keys, store)
    scores, cache = batch.mention_scores(params, training=training,
                                         dropout=dropout, rng=rng)
    loss, dlogits = nn.bce_loss(scores, labels, positive_only=positive_only)
    grads: dict[str, np.ndarray] = {}
    dg = nn.ffnn_backward(params, "span.ffnn_m", cache, dlogits, grads)
    batch.backward(dg, grads)
    return loss, grads


def pair_batch_loss_and_grads(params: dict, store: EmbeddingStore,
                              span_keys: list[tuple[str, int, int]],
                              ai: np.ndarray, bi: np.ndarray,
                              labels: np.ndarray, mode: str, *,
                              training: bool = False, dropout: float = 0.0,
                              rng: np.random.Generator | None = None,
                              positive_only: bool = False):
    """BCE loss over pair logits with gradients for every trainable tensor.

    `span_keys` lists the unique spans referenced by the index arrays ai/bi.
    Representations are recomputed from current parameters, so gradients
    flow through FFNN_a, FFNN_m (full mode), the attention projection, and
    the width table in one pass.
    """
    batch = spans.SpanBatch(params, span_keys, store)
    grads: dict[str, np.ndarray] = {}
    if mode == "full":
        sm, sm_cache = batch.mention_scores(params, training=training,
                                            dropout=dropout, rng=rng)
    else:
        sm, sm_cache = None, None
    logits, pcache = pairs.pair_logit_batch(params, batch.g, ai, bi, sm, mode,
                                            training=training,
                                            dropout=dropout, rng=rng)
    loss, dlogits = nn.bce_loss(logits, labels, positive_only=positive_only)
    dg, dsm = pairs.pair_logit_backward(params, pcache, dlogits, grads)
    if mode == "full":
        dg += nn.ffnn_backward(params, "span.ffnn_m", sm_cache, dsm, grads)
    batch.backward(dg, grads)
    return loss, grads


def attach_representations(params: dict, store: EmbeddingStore,
                           candidates: list[spans.SpanCandidate],
                           mode: str = "full") -> np.ndarray:
    """Fill g and mention_score on candidates; returns the g matrix."""
    batch = spans.SpanBatch(params, [c.key for c in candidates], store)
    if mode == "full":
        scores, _ = batch.mention_scores(params)
    else:
        scores = np.zeros(len(candidates))
    for idx, cand in enumerate(candidates):
        cand.g = batch.g[idx]
        cand.mention_score = float(scores[idx])
    return batch.g


def score_candidate_group(params: dict, store: EmbeddingStore,
                          candidates: list[spans.SpanCandidate],
                          mode: str) -> np.ndarray:
    """Raw pairwise score matrix for a canonical-ordered candidate group."""
    g = attach_representations(params, store, candidates, mode)
    sm = np.array([c.mention_score for c in candidates])
    return pairs.score_all_pairs(params, g, sm if mode == "full" else None,
                                 mode)


# -- checkpoint format --------------------------------------------------

def _write_tensor(fh, name: str, arr: np.ndarray) -> None:
    raw = name.encode("utf-8")
    fh.write(struct.pack("<H", len(raw)))
    fh.write(raw)
    arr = np.asarray(arr)
    fh.write(struct.pack("<B", arr.ndim))
    for d in arr.shape:
        fh.write(struct.pack("<I", d))
    fh.write(arr.astype("<f4", copy=False).tobytes(order="C"))


def save_checkpoint(path: str | Path, params: dict, hyper: HyperParams,
                    optimizer: nn.Adam | None = None) -> None:
    tensors = dict(params)
    if optimizer is not None:
        tensors.update(optimizer.state_tensors())
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", VERSION))
        fh.write(struct.pack("<IIII", hyper.dim, hyper.max_span_width,
                             hyper.width_dim, hyper.hidden))
        fh.write(struct.pack("<I", len(tensors)))
        for name in sorted(tensors):
            _write_tensor(fh, name, tensors[name])


class CheckpointError(ValueError):
    pass


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return data


def load_checkpoint(path: str | Path):
    """Returns (params, hyper, optimizer_tensors)."""
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != MAGIC:
            raise CheckpointError(f"bad magic; not a {MAGIC.decode()} file")
        (version,) = struct.unpack("<H", _read_exact(fh, 2, "version"))
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        dim, msw, wdim, hidden = struct.unpack(
            "<IIII", _read_exact(fh, 16, "hyperparameters"))
        hyper = HyperParams(dim, msw, wdim, hidden)
        (count,) = struct.unpack("<I", _read_exact(fh, 4, "tensor count"))
        params: dict[str, np.ndarray] = {}
        opt_tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2, "name length"))
            name = _read_exact(fh, name_len, "tensor name").decode("utf-8")
            (rank,) = struct.unpack("<B", _read_exact(fh, 1, "rank"))
            shape = tuple(struct.unpack("<I", _read_exact(fh, 4, "dim"))[0]
                          for _ in range(rank))
            n_items = int(np.prod(shape)) if shape else 1
            data = _read_exact(fh, 4 * n_items, f"data of {name!r}")
            arr = np.frombuffer(data, dtype="<f4").reshape(shape).astype(np.float64)
            if name.startswith("opt."):
                opt_tensors[name] = arr
            else:
                params[name] = arr
        if fh.read(1):
            raise CheckpointError("trailing bytes after last tensor")
    return params, hyper, opt_tensors
