import numpy as np
import pytest

from cdcoref.model import HyperParams, init_model, quantize_f32
from cdcoref.synthetic import SynthConfig, make_workspace
from cdcoref.training import (
    MODE_DEFAULTS,
    TrainConfig,
    ablation_suite,
    dev_span_recall,
    evaluate_split,
    predict_clusters,
    pretrain_mention_scorer,
    train,
)

SMALL_SYNTH = SynthConfig(n_topics=3, sentences_per_doc=2, dim=16,
                          clusters_per_subtopic=4, vocab_per_subtopic=12)


def small_config(**kw):
    base = dict(mode="all", mention_mode="gold", hidden=32, epochs=3,
                pretrain_epochs=3, seed=1)
    base.update(kw)
    return TrainConfig(**base).resolved()


@pytest.fixture(scope="module")
def workspace():
    return make_workspace(SMALL_SYNTH)


def test_config_resolution_and_mode_defaults():
    for mode, (width, lam) in MODE_DEFAULTS.items():
        cfg = TrainConfig(mode=mode).resolved()
        assert cfg.max_span_width == width
        assert cfg.lam == lam
    cfg = TrainConfig(mode="event", max_span_width=7, lam=0.5).resolved()
    assert cfg.max_span_width == 7
    assert cfg.lam == 0.5
    assert TrainConfig(mention_mode="gold").score_mode == "gold"
    assert TrainConfig(mention_mode="predicted").score_mode == "full"
    with pytest.raises(ValueError):
        TrainConfig(mode="verbs").resolved()
    with pytest.raises(ValueError):
        TrainConfig(mention_mode="both").resolved()


def test_pretrain_reaches_high_recall_on_separable_data():
    # Five topics so the train split gets three; the tiny fixture corpus
    # gives too few gradient steps for recall to climb.
    corpus, store = make_workspace(
        SynthConfig(dim=16, cluster_signal=1.0, noise_scale=0.1))
    cfg = small_config(mention_mode="predicted", pretrain_epochs=10,
                       learning_rate=1e-3)
    hyper = HyperParams(store.dim, cfg.max_span_width, cfg.width_dim, cfg.hidden)
    params = init_model(hyper, np.random.default_rng([cfg.seed, 0]))
    history = pretrain_mention_scorer(corpus, store, cfg, params)
    assert history[-1]["dev_span_recall"] >= 0.95
    dev = corpus.split("dev")
    assert dev_span_recall(quantize_f32(params), dev, store, cfg) >= 0.95


def test_pretrain_loss_decreases(workspace):
    corpus, store = workspace
    cfg = small_config(mention_mode="predicted", pretrain_epochs=3,
                       patience=99)
    hyper = HyperParams(store.dim, cfg.max_span_width, cfg.width_dim, cfg.hidden)
    params = init_model(hyper, np.random.default_rng([cfg.seed, 0]))
    history = pretrain_mention_scorer(corpus, store, cfg, params)
    losses = [row["loss"] for row in history]
    assert losses[-1] < losses[0]


def test_pretrain_patience_stops_early(workspace):
    corpus, store = workspace
    cfg = small_config(mention_mode="predicted", pretrain_epochs=10,
                       patience=1)
    hyper = HyperParams(store.dim, cfg.max_span_width, cfg.width_dim, cfg.hidden)
    params = init_model(hyper, np.random.default_rng([cfg.seed, 0]))
    history = pretrain_mention_scorer(corpus, store, cfg, params)
    assert len(history) <= 10
    recalls = [row["dev_span_recall"] for row in history]
    if len(history) < 10:
        # Stopped because the last epoch did not improve on the best.
        assert recalls[-1] <= max(recalls[:-1]) + 1e-12


def test_gold_training_learns_and_is_deterministic():
    # Sharper signal and a hotter learning rate so the tiny corpus clears
    # the all-singleton dev plateau within a handful of epochs.
    corpus, store = make_workspace(
        SynthConfig(n_topics=3, sentences_per_doc=2, dim=16,
                    clusters_per_subtopic=4, vocab_per_subtopic=12,
                    cluster_signal=1.0, noise_scale=0.1))
    cfg = small_config(epochs=8, learning_rate=3e-3)
    a = train(corpus, store, cfg)
    b = train(corpus, store, cfg)
    assert a.best_epoch == b.best_epoch
    assert a.best_dev_f1 == b.best_dev_f1
    assert set(a.params) == set(b.params)
    for name in a.params:
        assert np.array_equal(a.params[name], b.params[name])
    losses = [row["loss"] for row in a.history]
    assert losses[-1] < losses[0]
    assert a.best_dev_f1 >= 0.5
    assert a.best_dev_f1 > a.history[0]["dev_conll_f1"]
    assert a.pretrain_history == []  # gold mode skips pretraining


def test_different_seeds_differ(workspace):
    corpus, store = workspace
    a = train(corpus, store, small_config(seed=1))
    b = train(corpus, store, small_config(seed=2))
    assert any(not np.array_equal(a.params[k], b.params[k]) for k in a.params)


def test_no_pretrain_skips_stage_one(workspace):
    corpus, store = workspace
    cfg = small_config(mention_mode="predicted", no_pretrain=True, epochs=1)
    result = train(corpus, store, cfg)
    assert result.pretrain_history == []
    # With zero joint epochs the parameters are exactly the Xavier init.
    cfg0 = small_config(mention_mode="predicted", no_pretrain=True, epochs=0)
    result0 = train(corpus, store, cfg0)
    hyper = HyperParams(store.dim, cfg0.max_span_width, cfg0.width_dim,
                        cfg0.hidden)
    init = quantize_f32(init_model(hyper, np.random.default_rng([cfg0.seed, 0])))
    for name in init:
        assert np.array_equal(result0.params[name], init[name])


def test_frozen_pruning_freezes_mention_scorer(workspace):
    corpus, store = workspace
    cfg = small_config(mention_mode="predicted", frozen_pruning=True,
                       epochs=2, pretrain_epochs=2)
    hyper = HyperParams(store.dim, cfg.max_span_width, cfg.width_dim, cfg.hidden)
    params = init_model(hyper, np.random.default_rng([cfg.seed, 0]))
    pretrain_mention_scorer(corpus, store, cfg, params)
    before = {k: params[k].copy() for k in params if k.startswith("span.ffnn_m.")}
    result = train(corpus, store, cfg)
    for name, arr in before.items():
        assert np.array_equal(result.params[name],
                              arr.astype(np.float32).astype(np.float64)), name
    # The pair scorer did train.
    assert any(row["loss"] > 0 for row in result.history)


def test_gold_mode_candidates_constant_across_params(workspace):
    corpus, store = workspace
    cfg = small_config()
    hyper = HyperParams(store.dim, cfg.max_span_width, cfg.width_dim, cfg.hidden)
    p1 = init_model(hyper, np.random.default_rng(1))
    p2 = init_model(hyper, np.random.default_rng(2))
    r1, g1 = predict_clusters(p1, corpus.split("dev"), store, cfg)
    r2, g2 = predict_clusters(p2, corpus.split("dev"), store, cfg)
    keys1 = [[c.key for c in group] for group in g1]
    keys2 = [[c.key for c in group] for group in g2]
    assert keys1 == keys2  # gold candidates do not depend on parameters


def test_predict_clusters_covers_every_candidate_once(workspace):
    corpus, store = workspace
    cfg = small_config()
    result = train(corpus, store, cfg)
    dev = corpus.split("dev")
    response, grouped = predict_clusters(result.params, dev, store, cfg)
    all_keys = [c.key for group in grouped for c in group]
    covered = [k for cluster in response for k in cluster]
    assert sorted(covered) == sorted(all_keys)


def test_evaluate_split_report(workspace):
    corpus, store = workspace
    cfg = small_config()
    result = train(corpus, store, cfg)
    report = evaluate_split(result.params, corpus.split("dev"), store, cfg)
    assert report.conll_f1 == pytest.approx(result.best_dev_f1, abs=1e-12)
    assert report.scope == "combined"
    # Gold mention mode scores both sides over the same mention set.
    assert report.mention_detection.f1 == pytest.approx(1.0)


def test_checkpoint_f1_equals_measured_f1(tmp_path, workspace):
    # The quantize-before-select invariant: saving and reloading the winner
    # reproduces the dev score exactly.
    from cdcoref.model import load_checkpoint, save_checkpoint
    corpus, store = workspace
    cfg = small_config()
    result = train(corpus, store, cfg)
    path = tmp_path / "model.cdcm"
    save_checkpoint(path, result.params, result.hyper)
    loaded, hyper, _ = load_checkpoint(path)
    report = evaluate_split(loaded, corpus.split("dev"), store, cfg)
    assert report.conll_f1 == pytest.approx(result.best_dev_f1, abs=0.0)


def test_ablation_suite_rows(workspace):
    corpus, store = workspace
    cfg = small_config(mention_mode="predicted", epochs=1, pretrain_epochs=1)
    out = ablation_suite(corpus, store, cfg)
    names = [row["name"] for row in out["rows"]]
    assert names == ["base", "no_pretrain", "frozen_pruning", "no_neg_sampling"]
    assert out["rows"][0]["delta"] == 0.0
    for row in out["rows"]:
        assert 0.0 <= row["dev_conll_f1"] <= 1.0


def test_train_log_lines(workspace):
    corpus, store = workspace
    lines = []
    train(corpus, store, small_config(epochs=2), log=lines.append)
    assert any(line.startswith("epoch 0:") for line in lines)
    assert any("dev_conll_f1" in line for line in lines)
