"""Acceptance suite: one test per shipping criterion.

Run with `pytest -v tests/test_acceptance.py` to get one pass/fail line per
criterion. Each test pins its own tolerance and wall-clock budget; the two
training criteria are the slow ones (several minutes together), everything
else finishes in seconds.
"""

import itertools
import math
import time
from fractions import Fraction

import numpy as np

import cdcoref.model as model
from cdcoref.cli import main as cli_main
from cdcoref.clustering import agglomerative_cluster, brute_force_cluster
from cdcoref.corpus import Document
from cdcoref.embeddings import EmbeddingStore
from cdcoref.metrics import ceaf_e, evaluate, phi4
from cdcoref.nn import finite_difference_grads, relative_error
from cdcoref.spans import SpanCandidate, enumerate_spans, keep_count, prune_spans
from cdcoref.synthetic import SynthConfig, make_workspace
from cdcoref.training import TrainConfig, ablation_suite, train


def random_partition(rng, n_mentions, max_clusters):
    """Random disjoint clusters over ('d<k>', i, i) mentions."""
    mentions = [(f"d{rng.integers(0, 4)}", int(i), int(i))
                for i in range(n_mentions)]
    n_clusters = int(rng.integers(1, max_clusters + 1))
    labels = rng.integers(0, n_clusters, size=n_mentions)
    clusters = [set() for _ in range(n_clusters)]
    for mention, label in zip(mentions, labels):
        clusters[label].add(mention)
    return [c for c in clusters if c]


def test_metric_correctness():
    """MUC, B3, CEAF-e worked example to 1e-9; CEAF-e vs brute force."""
    started = time.perf_counter()
    key = [{"a", "b", "c"}, {"d", "e"}]
    response = [{"a", "b"}, {"c", "d", "e"}]
    report = evaluate(key, response)
    assert abs(report.muc.f1 - 2.0 / 3.0) <= 1e-9
    assert abs(report.b_cubed.f1 - 11.0 / 15.0) <= 1e-9
    assert abs(report.ceaf_e.f1 - 0.8) <= 1e-9
    assert abs(report.conll_f1 - (2 / 3 + 11 / 15 + 0.8) / 3.0) <= 1e-9

    rng = np.random.default_rng(20240)
    for case in range(1000):
        key = random_partition(rng, int(rng.integers(1, 13)), 6)
        response = random_partition(rng, int(rng.integers(1, 13)), 6)
        got = ceaf_e(key, response)
        small, large = sorted((key, response), key=len)
        best = 0.0
        for perm in itertools.permutations(range(len(large)), len(small)):
            best = max(best, sum(phi4(small[i], large[j])
                                 for i, j in enumerate(perm)))
        assert abs(got.recall * len(key) - best) <= 1e-9, case
        assert abs(got.precision * len(response) - best) <= 1e-9, case
    assert time.perf_counter() - started < 10.0


def test_identity_scoring():
    """response = key scores 1.0 on every metric for 100+ random corpora."""
    started = time.perf_counter()
    rng = np.random.default_rng(977)
    cases = 0
    while cases < 100:
        key = random_partition(rng, int(rng.integers(2, 40)), 8)
        if not any(len(c) > 1 for c in key):
            continue  # all-singleton corpora make link recall undefined
        cases += 1
        response = [set(c) for c in key]
        report = evaluate(key, response)
        for result in (report.muc, report.b_cubed, report.ceaf_e,
                       report.mention_detection):
            assert result.recall == 1.0
            assert result.precision == 1.0
            assert result.f1 == 1.0
        assert report.conll_f1 == 1.0
    assert time.perf_counter() - started < 5.0


def test_gradient_fidelity():
    """Analytic gradients match central differences on 50+ random setups."""
    started = time.perf_counter()
    rng = np.random.default_rng(4242)
    groups_seen = set()
    for case in range(50):
        dim = int(rng.integers(3, 7))
        hyper = model.HyperParams(dim=dim,
                                  max_span_width=int(rng.integers(2, 5)),
                                  width_dim=int(rng.integers(2, 6)),
                                  hidden=int(rng.integers(4, 10)))
        n_tokens = int(rng.integers(hyper.max_span_width + 2, 12))
        store = EmbeddingStore(
            {"doc": rng.standard_normal((n_tokens, dim))})
        doc = Document("doc", "t", "s", [["w"] * n_tokens])
        spans = [("doc", s, e)
                 for s, e in enumerate_spans(doc, hyper.max_span_width)]
        rng.shuffle(spans)
        params = model.init_model(hyper, rng)

        n_pairs = int(rng.integers(2, 7))
        ai = rng.integers(0, len(spans) // 2, size=n_pairs)
        bi = rng.integers(len(spans) // 2, len(spans), size=n_pairs)
        labels = rng.integers(0, 2, size=n_pairs).astype(float)
        mode = "full" if case % 3 else "gold"
        loss, grads = model.pair_batch_loss_and_grads(
            params, store, spans, ai, bi, labels, mode)
        if case % 4 == 0:
            span_labels = rng.integers(0, 2, size=len(spans)).astype(float)
            span_loss, span_grads = model.span_batch_loss_and_grads(
                params, store, spans, span_labels)
            for name, grad in span_grads.items():
                grads[name] = grads.get(name, 0.0) + grad

            def loss_fn(p, spans=spans, ai=ai, bi=bi, labels=labels,
                        mode=mode, span_labels=span_labels, store=store):
                return (model.pair_batch_loss_and_grads(
                            p, store, spans, ai, bi, labels, mode)[0]
                        + model.span_batch_loss_and_grads(
                            p, store, spans, span_labels)[0])
        else:
            def loss_fn(p, spans=spans, ai=ai, bi=bi, labels=labels,
                        mode=mode, store=store):
                return model.pair_batch_loss_and_grads(
                    p, store, spans, ai, bi, labels, mode)[0]

        fd = finite_difference_grads(loss_fn, params, h=1e-4)
        for name in params:
            analytic = grads.get(name, np.zeros_like(params[name]))
            err = relative_error(analytic, fd[name])
            assert err <= 1e-4, (case, name, err)
            if np.asarray(analytic).any():
                groups_seen.add(name.split(".")[1])
    # every parameter family exercised: attention projection, width table,
    # mention scorer FFNN, pairwise scorer FFNN
    assert groups_seen == {"att", "width", "ffnn_m", "ffnn_a"}
    assert time.perf_counter() - started < 60.0


def refines(fine, coarse):
    return all(any(f <= c for c in coarse) for f in fine)


def test_clustering_oracle():
    """Greedy average linkage matches the exhaustive oracle; tau refines."""
    started = time.perf_counter()
    rng = np.random.default_rng(515)
    for case in range(1000):
        n = int(rng.integers(1, 9))
        values = rng.uniform(0.0, 1.0, size=(n, n))
        values = (values + values.T) / 2.0
        np.fill_diagonal(values, 1.0)
        tau = float(rng.uniform(0.3, 0.9))
        fast = agglomerative_cluster(values, tau=tau)
        slow = brute_force_cluster(values, tau=tau)
        assert fast.as_partition() == slow.as_partition(), case
        higher = agglomerative_cluster(values, tau=min(tau + 0.1, 1.0))
        assert refines(higher.as_partition(), fast.as_partition()), case
    assert time.perf_counter() - started < 30.0


def test_pruning_contract():
    """|kept| = min(ceil(lam*T), candidates) and stable tie-breaks."""
    started = time.perf_counter()
    rng = np.random.default_rng(88)
    lams = [0.25, 0.35, 0.4, 0.05, 0.7, 1.0]
    for case in range(300):
        t = int(rng.integers(1, 80))
        doc = Document("d", "t", "s", [["w"] * t])
        width = int(rng.integers(1, 6))
        candidates = [SpanCandidate("d", s, e)
                      for s, e in enumerate_spans(doc, width)]
        # coarse scores force plenty of ties
        for c in candidates:
            c.mention_score = float(np.round(rng.uniform(0, 1), 1))
        for lam in lams:
            kept = prune_spans(list(candidates), lam, t)
            exact = math.ceil(Fraction(str(lam)) * t)
            assert keep_count(lam, t) == exact, (lam, t)
            assert len(kept) == min(exact, len(candidates))
            perm = [candidates[i] for i in rng.permutation(len(candidates))]
            again = prune_spans(perm, lam, t)
            assert [(c.start, c.end) for c in again] == \
                   [(c.start, c.end) for c in kept]
    assert time.perf_counter() - started < 5.0


def test_synthetic_end_to_end():
    """Gold >= 0.90 within 10 epochs, predicted >= 0.75, gold > predicted."""
    started = time.perf_counter()
    corpus, store = make_workspace(SynthConfig())
    assert len(corpus.documents) == 20
    gold = train(corpus, store,
                 TrainConfig(mode="all", mention_mode="gold", epochs=10,
                             seed=3))
    predicted = train(corpus, store,
                      TrainConfig(mode="all", mention_mode="predicted",
                                  epochs=10, seed=3))
    assert gold.best_dev_f1 >= 0.90
    assert predicted.best_dev_f1 >= 0.75
    assert gold.best_dev_f1 > predicted.best_dev_f1
    assert time.perf_counter() - started < 600.0


def test_ablation_directionality():
    """Across 5 seeds, no pre-training and frozen pruning both hurt."""
    started = time.perf_counter()
    corpus, store = make_workspace(SynthConfig())
    deltas = {"no_pretrain": [], "frozen_pruning": []}
    for seed in (1, 2, 3, 4, 5):
        cfg = TrainConfig(mode="all", mention_mode="predicted", epochs=10,
                          seed=seed)
        suite = ablation_suite(corpus, store, cfg)
        for row in suite["rows"]:
            if row["name"] in deltas:
                deltas[row["name"]].append(row["delta"])
    assert float(np.mean(deltas["no_pretrain"])) < 0.0
    assert float(np.mean(deltas["frozen_pruning"])) < 0.0
    assert time.perf_counter() - started < 1800.0


def test_determinism(tmp_path):
    """Same seed, two fresh pipeline runs: byte-identical artifacts."""
    synth = ["--topics", "3", "--sentences", "2", "--dim", "16",
             "--clusters-per-subtopic", "4", "--vocab", "12",
             "--signal", "1.0", "--noise", "0.1"]
    train_args = ["--mode", "all", "--mentions", "gold", "--hidden", "16",
                  "--epochs", "2", "--seed", "7"]
    artifacts = ("corpus.json", "embeddings.cdce", "model.cdcm",
                 "clusters-dev.json", "response-dev.conll", "key-dev.conll",
                 "eval-dev-combined-include.json")
    payloads = []
    for run in ("one", "two"):
        ws = tmp_path / run
        assert cli_main(["synth", "--workspace", str(ws)] + synth) == 0
        assert cli_main(["train", "--workspace", str(ws)] + train_args) == 0
        assert cli_main(["predict", "--workspace", str(ws), "--split", "dev"]
                        + train_args) == 0
        assert cli_main(["evaluate", "--workspace", str(ws), "--split", "dev"]
                        + train_args) == 0
        payloads.append({name: (ws / name).read_bytes()
                         for name in artifacts})
    assert payloads[0] == payloads[1]


def test_non_reproducibility_note():
    """README states what desk-scale runs can and cannot reproduce."""
    from pathlib import Path

    readme = Path(__file__).resolve().parents[1] / "README.md"
    text = readme.read_text(encoding="utf-8")
    assert "## Reproducibility" in text
    lowered = text.lower()
    assert "roberta" in lowered
    assert "synthetic" in lowered
    # the full-reproduction path via the embedding extractor is documented
    assert "extractor" in lowered
