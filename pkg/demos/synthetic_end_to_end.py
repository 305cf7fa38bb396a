"""End-to-end run on a synthetic workspace: generate, train, evaluate.

Uses a reduced corpus and a hot learning rate so the whole script takes
seconds; the shipped defaults (lr 1e-4, epochs 10+) are exercised by the
acceptance tests instead.
"""

import numpy as np

from cdcoref.corpus import select_mentions
from cdcoref.metrics import evaluate
from cdcoref.synthetic import SynthConfig, make_workspace
from cdcoref.training import TrainConfig, predict_clusters, train

# Topics split into train/dev/test; each topic has two subtopics with
# disjoint vocabularies, so nothing memorized on train topics transfers
# except the actual geometry of the embedding space.
config = SynthConfig(n_topics=4, dim=32, cluster_signal=1.0, noise_scale=0.15)
corpus, store = make_workspace(config)
print(f"documents {len(corpus.documents)} mentions {len(corpus.mentions)} "
      f"dim {store.dim}")

# Gold-mention training: only the pairwise scorer matters.
gold_cfg = TrainConfig(mode="all", mention_mode="gold", epochs=6,
                       learning_rate=3e-3, hidden=64, seed=1)
gold = train(corpus, store, gold_cfg)
print(f"gold mentions:      best dev CoNLL F1 {gold.best_dev_f1:.4f} "
      f"(epoch {gold.best_epoch})")

# Predicted-mention training adds span detection and top-lambda*T pruning;
# stage one pre-trains the mention scorer on span recall.
pred_cfg = TrainConfig(mode="all", mention_mode="predicted", epochs=6,
                       pretrain_epochs=6, learning_rate=3e-3, hidden=64,
                       seed=1)
pred = train(corpus, store, pred_cfg)
for row in pred.pretrain_history:
    print(f"  pretrain epoch {row['epoch']}: "
          f"dev span recall {row['dev_span_recall']:.3f}")
print(f"predicted mentions: best dev CoNLL F1 {pred.best_dev_f1:.4f} "
      f"(epoch {pred.best_epoch})")

# Detecting spans is strictly harder than being handed them.
assert gold.best_dev_f1 >= pred.best_dev_f1

# Score the held-out test topic with the gold-mode model.
test = corpus.split("test")
groups = [[d.doc_id for d in test.documents_of_topic(t)]
          for t in test.topics()]
resolved = gold_cfg.resolved()
response, _ = predict_clusters(gold.params, test, store, resolved, groups)
key = select_mentions(test, resolved.mode).cluster_sets()
report = evaluate(key, response)
print(f"test topic:         MUC {report.muc.f1:.3f} "
      f"B3 {report.b_cubed.f1:.3f} CEAF-e {report.ceaf_e.f1:.3f} "
      f"CoNLL {report.conll_f1:.3f}")

# Same seed, same numbers: training is bit-deterministic.
again = train(corpus, store, gold_cfg)
assert again.best_dev_f1 == gold.best_dev_f1
assert all(np.array_equal(again.params[k], gold.params[k])
           for k in gold.params)
print("retrained with the same seed: identical parameters")
