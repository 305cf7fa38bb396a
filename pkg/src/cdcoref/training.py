"""Two-stage training, prediction, and the ablation suite.

Stage one pre-trains the mention scorer s_m as a binary classifier over all
enumerated spans (gold spans are the positives), stopping after a fixed
epoch budget or when dev span recall at the pruning cutoff stops improving.
Stage two trains the pair scorer jointly: every epoch re-prunes candidates
with the current mention scores (dynamic pruning), samples negatives at
neg_ratio per positive, and optimizes BCE over pair logits in minibatches.
Model selection keeps the epoch with the best dev CoNLL F1, evaluated with
float32-quantized parameters so the measured score is exactly the score of
the checkpoint that gets saved.

Gold mention mode feeds gold spans directly to the pair scorer and ignores
s_m entirely (scoring mode "gold"); predicted mode enumerates, scores, and
prunes spans per document (scoring mode "full").
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .clustering import agglomerative_cluster
from .corpus import Corpus, MentionView, select_mentions
from .embeddings import EmbeddingStore
from .metrics import EvalReport, evaluate
from .model import (HyperParams, init_model, pair_batch_loss_and_grads,
                    quantize_f32, span_batch_loss_and_grads)
from .pairs import MentionPair, build_training_pairs, canonical_sort, score_all_pairs
from .spans import (SpanBatch, SpanCandidate, enumerate_spans,
                    gold_span_candidates, mention_scorer_names, prune_spans)

# mode -> (max_span_width, lambda)
MODE_DEFAULTS = {"event": (10, 0.25), "entity": (15, 0.35), "all": (15, 0.4)}

_PRETRAIN_TAG = 11
_TRAIN_TAG = 22


@dataclass(frozen=True)
class TrainConfig:
    mode: str = "all"                 # event | entity | all
    mention_mode: str = "gold"        # gold | predicted
    batch_size: int = 32
    dropout: float = 0.3
    learning_rate: float = 1e-4
    hidden: int = 1024
    width_dim: int = 20
    max_span_width: int | None = None  # None: per-mode default
    lam: float | None = None           # None: per-mode default
    tau: float = 0.75
    neg_ratio: float = 20.0
    epochs: int = 30
    pretrain_epochs: int = 10
    patience: int = 2
    seed: int = 0
    no_pretrain: bool = False
    frozen_pruning: bool = False
    no_neg_sampling: bool = False

    def resolved(self) -> "TrainConfig":
        if self.mode not in MODE_DEFAULTS:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mention_mode not in ("gold", "predicted"):
            raise ValueError(f"unknown mention mode {self.mention_mode!r}")
        width, lam = MODE_DEFAULTS[self.mode]
        return replace(self,
                       max_span_width=self.max_span_width or width,
                       lam=self.lam if self.lam is not None else lam)

    @property
    def score_mode(self) -> str:
        return "gold" if self.mention_mode == "gold" else "full"


@dataclass
class TrainResult:
    params: dict                      # best epoch, float32-quantized
    hyper: HyperParams
    config: TrainConfig
    best_epoch: int
    best_dev_f1: float
    history: list[dict] = field(default_factory=list)
    pretrain_history: list[dict] = field(default_factory=list)


def _doc_candidates(params: dict, corpus: Corpus, store: EmbeddingStore,
                    config: TrainConfig, view: MentionView,
                    doc_id: str) -> list[SpanCandidate]:
    """Candidate set of one document under the configured mention mode."""
    doc = corpus.document(doc_id)
    if config.mention_mode == "gold":
        return gold_span_candidates(doc, list(view.for_doc(doc_id)))
    cands = [SpanCandidate(doc_id, s, e)
             for s, e in enumerate_spans(doc, config.max_span_width)]
    batch = SpanBatch(params, [c.key for c in cands], store)
    scores, _ = batch.mention_scores(params)
    for c, sc in zip(cands, scores):
        c.mention_score = float(sc)
    return prune_spans(cands, config.lam, doc.n_tokens)


def _group_candidates(params: dict, corpus: Corpus, store: EmbeddingStore,
                      config: TrainConfig, view: MentionView,
                      doc_ids: list[str]) -> list[SpanCandidate]:
    cands: list[SpanCandidate] = []
    for doc_id in doc_ids:
        cands.extend(_doc_candidates(params, corpus, store, config, view, doc_id))
    doc_pos = {d.doc_id: i for i, d in enumerate(corpus.documents)}
    return canonical_sort(cands, doc_pos)


def _pair_batches(pairs: list[MentionPair], batch_size: int,
                  rng: np.random.Generator):
    order = rng.permutation(len(pairs))
    for lo in range(0, len(order), batch_size):
        chunk = [pairs[k] for k in order[lo:lo + batch_size]]
        keys: list[tuple[str, int, int]] = []
        index: dict[tuple[str, int, int], int] = {}
        ai = np.empty(len(chunk), dtype=np.int64)
        bi = np.empty(len(chunk), dtype=np.int64)
        labels = np.empty(len(chunk), dtype=np.float64)
        for row, p in enumerate(chunk):
            for cand, out in ((p.a, ai), (p.b, bi)):
                idx = index.get(cand.key)
                if idx is None:
                    idx = len(keys)
                    index[cand.key] = idx
                    keys.append(cand.key)
                out[row] = idx
            labels[row] = p.label
        yield keys, ai, bi, labels


def pretrain_mention_scorer(corpus: Corpus, store: EmbeddingStore,
                            config: TrainConfig, params: dict) -> list[dict]:
    """Binary span classification on the train split; updates params in place.

    Stops after config.pretrain_epochs epochs or once dev span recall at
    the ceil(lambda*T) cutoff has not improved for config.patience epochs.
    """
    config = config.resolved()
    train = corpus.split("train")
    dev = corpus.split("dev")
    view = select_mentions(corpus, config.mode)
    gold_keys = view.mention_keys()
    per_doc = []
    for doc in train.documents:
        spans = enumerate_spans(doc, config.max_span_width)
        keys = [(doc.doc_id, s, e) for s, e in spans]
        labels = np.array([float(k in gold_keys) for k in keys])
        per_doc.append((keys, labels))
    all_keys = [k for keys, _ in per_doc for k in keys]
    all_labels = np.concatenate([lab for _, lab in per_doc])
    optimizer = nn.Adam(params, lr=config.learning_rate)
    history: list[dict] = []
    best_recall = -1.0
    stale = 0
    for epoch in range(config.pretrain_epochs):
        rng = np.random.default_rng([config.seed, _PRETRAIN_TAG, epoch])
        order = rng.permutation(len(all_keys))
        losses = []
        start = time.perf_counter()
        for lo in range(0, len(order), config.batch_size):
            rows = order[lo:lo + config.batch_size]
            keys = [all_keys[r] for r in rows]
            loss, grads = span_batch_loss_and_grads(
                params, store, keys, all_labels[rows], training=True,
                dropout=config.dropout, rng=rng)
            optimizer.step(params, grads)
            losses.append(loss)
        recall = dev_span_recall(quantize_f32(params), dev, store, config)
        history.append({"epoch": epoch, "loss": float(np.mean(losses)),
                        "dev_span_recall": recall,
                        "seconds": time.perf_counter() - start})
        if recall > best_recall + 1e-12:
            best_recall = recall
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    return history


def dev_span_recall(params: dict, split: Corpus, store: EmbeddingStore,
                    config: TrainConfig) -> float:
    """Micro-averaged recall of gold spans among the kept top-scoring spans."""
    config = config.resolved()
    view = select_mentions(split, config.mode)
    gold_keys = view.mention_keys()
    hit = total = 0
    for doc in split.documents:
        gold_here = {k for k in gold_keys if k[0] == doc.doc_id}
        if not gold_here:
            continue
        cands = [SpanCandidate(doc.doc_id, s, e)
                 for s, e in enumerate_spans(doc, config.max_span_width)]
        batch = SpanBatch(params, [c.key for c in cands], store)
        scores, _ = batch.mention_scores(params)
        for c, sc in zip(cands, scores):
            c.mention_score = float(sc)
        kept = prune_spans(cands, config.lam, doc.n_tokens)
        hit += sum(1 for c in kept if c.key in gold_here)
        total += len(gold_here)
    return hit / total if total else 0.0


def predict_clusters(params: dict, corpus: Corpus, store: EmbeddingStore,
                     config: TrainConfig,
                     doc_groups: list[list[str]] | None = None
                     ) -> tuple[list[set], list[list[SpanCandidate]]]:
    """Cluster each document group independently; returns (partition, groups).

    The partition covers every candidate exactly once (singletons included)
    with mentions identified by (doc_id, start, end). Groups default to the
    gold topics of the given corpus.
    """
    config = config.resolved()
    view = select_mentions(corpus, config.mode)
    if doc_groups is None:
        doc_groups = [[d.doc_id for d in corpus.documents_of_topic(t)]
                      for t in corpus.topics()]
    response: list[set] = []
    grouped: list[list[SpanCandidate]] = []
    for group in doc_groups:
        cands = _group_candidates(params, corpus, store, config, view, group)
        grouped.append(cands)
        if not cands:
            continue
        sm = np.array([c.mention_score for c in cands])
        batch = SpanBatch(params, [c.key for c in cands], store)
        raw = score_all_pairs(params, batch.g,
                              sm if config.score_mode == "full" else None,
                              config.score_mode)
        assignment = agglomerative_cluster(nn.sigmoid(raw), config.tau)
        for cluster in assignment.clusters:
            response.append({cands[i].key for i in cluster})
    return response, grouped


def evaluate_split(params: dict, split: Corpus, store: EmbeddingStore,
                   config: TrainConfig,
                   doc_groups: list[list[str]] | None = None, *,
                   scope: str = "combined",
                   singleton_mode: str = "include") -> EvalReport:
    config = config.resolved()
    view = select_mentions(split, config.mode)
    key = view.cluster_sets()
    response, _ = predict_clusters(params, split, store, config, doc_groups)
    return evaluate(key, response, scope=scope, singleton_mode=singleton_mode)


def train(corpus: Corpus, store: EmbeddingStore, config: TrainConfig,
          log=None) -> TrainResult:
    """Full two-stage run on the corpus splits; returns the selected model."""
    config = config.resolved()
    hyper = HyperParams(store.dim, config.max_span_width, config.width_dim,
                        config.hidden)
    params = init_model(hyper, np.random.default_rng([config.seed, 0]))
    say = log if log is not None else lambda msg: None

    pretrain_history: list[dict] = []
    if config.mention_mode == "predicted" and not config.no_pretrain:
        pretrain_history = pretrain_mention_scorer(corpus, store, config, params)
        for row in pretrain_history:
            say(f"pretrain epoch {row['epoch']}: loss {row['loss']:.4f} "
                f"dev_span_recall {row['dev_span_recall']:.4f} "
                f"({row['seconds']:.1f}s)")

    train_split = corpus.split("train")
    dev_split = corpus.split("dev")
    view = select_mentions(corpus, config.mode)
    cluster_of = view.cluster_of()
    topics = train_split.topics()
    optimizer = nn.Adam(params, lr=config.learning_rate)
    skip = frozenset(mention_scorer_names(params)) if config.frozen_pruning \
        else frozenset()
    frozen_candidates: dict[str, list[SpanCandidate]] | None = None

    history: list[dict] = []
    best_f1 = -1.0
    best_epoch = -1
    best_params = quantize_f32(params)
    neg_ratio = None if config.no_neg_sampling else config.neg_ratio
    for epoch in range(config.epochs):
        rng = np.random.default_rng([config.seed, _TRAIN_TAG, epoch])
        losses = []
        start = time.perf_counter()
        for topic in topics:
            doc_ids = [d.doc_id for d in train_split.documents_of_topic(topic)]
            if config.frozen_pruning and config.mention_mode == "predicted":
                if frozen_candidates is None:
                    frozen_candidates = {}
                if topic not in frozen_candidates:
                    frozen_candidates[topic] = _group_candidates(
                        params, corpus, store, config, view, doc_ids)
                cands = frozen_candidates[topic]
            else:
                cands = _group_candidates(params, corpus, store, config,
                                          view, doc_ids)
            pairs = build_training_pairs(cands, cluster_of, neg_ratio, rng)
            if not pairs:
                continue
            for keys, ai, bi, labels in _pair_batches(pairs,
                                                      config.batch_size, rng):
                loss, grads = pair_batch_loss_and_grads(
                    params, store, keys, ai, bi, labels, config.score_mode,
                    training=True, dropout=config.dropout, rng=rng)
                optimizer.step(params, grads, skip=skip)
                losses.append(loss)
        snapshot = quantize_f32(params)
        report = evaluate_split(snapshot, dev_split, store, config)
        f1 = report.conll_f1
        mean_loss = float(np.mean(losses)) if losses else 0.0
        history.append({"epoch": epoch, "loss": mean_loss, "dev_conll_f1": f1,
                        "seconds": time.perf_counter() - start})
        say(f"epoch {epoch}: loss {mean_loss:.4f} dev_conll_f1 {f1:.4f} "
            f"({history[-1]['seconds']:.1f}s)")
        if f1 > best_f1 + 1e-12:
            best_f1 = f1
            best_epoch = epoch
            best_params = snapshot
    return TrainResult(best_params, hyper, config, best_epoch, best_f1,
                       history, pretrain_history)


ABLATIONS = ("no_pretrain", "frozen_pruning", "no_neg_sampling")


def ablation_suite(corpus: Corpus, store: EmbeddingStore, config: TrainConfig,
                   log=None) -> dict:
    """Base run plus the three ablations, shared seed; Table-3-shaped rows."""
    config = config.resolved()
    rows = []
    base_f1 = None
    for name in ("base",) + ABLATIONS:
        variant = config if name == "base" else replace(config, **{name: True})
        result = train(corpus, store, variant, log=log)
        if base_f1 is None:
            base_f1 = result.best_dev_f1
        rows.append({"name": name, "dev_conll_f1": result.best_dev_f1,
                     "delta": result.best_dev_f1 - base_f1})
    return {"mode": config.mode, "mention_mode": config.mention_mode,
            "seed": config.seed, "rows": rows}
