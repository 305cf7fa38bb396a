"""Auditing analytic gradients against central finite differences.

Every learnable tensor in the model gets its backpropagated gradient
compared to (f(x+h) - f(x-h)) / 2h, entry by entry, in float64.
"""

import numpy as np

from cdcoref.corpus import Document
from cdcoref.embeddings import EmbeddingStore
from cdcoref.model import HyperParams, init_model, pair_batch_loss_and_grads
from cdcoref.nn import finite_difference_grads, relative_error
from cdcoref.spans import enumerate_spans

rng = np.random.default_rng(0)

# A small document with random frozen embeddings keeps the finite
# difference loop fast: cost is two loss evaluations per scalar parameter.
hyper = HyperParams(dim=6, max_span_width=3, width_dim=4, hidden=8)
store = EmbeddingStore({"doc": rng.standard_normal((10, hyper.dim))})
doc = Document("doc", "topic", "subtopic", [["tok"] * 10])
spans = [("doc", s, e) for s, e in enumerate_spans(doc, hyper.max_span_width)]
params = init_model(hyper, rng)
print("tensors:", ", ".join(sorted(params)))

# Six labeled span pairs through the full scoring path: attention-weighted
# span representations, width features, mention scores, pairwise scores.
ai = rng.integers(0, len(spans) // 2, size=6)
bi = rng.integers(len(spans) // 2, len(spans), size=6)
labels = rng.integers(0, 2, size=6).astype(float)
loss, grads = pair_batch_loss_and_grads(params, store, spans, ai, bi,
                                        labels, "full")
print(f"loss {loss:.6f}")

fd = finite_difference_grads(
    lambda p: pair_batch_loss_and_grads(p, store, spans, ai, bi,
                                        labels, "full")[0],
    params, h=1e-4)

worst = 0.0
for name in sorted(params):
    err = relative_error(grads.get(name, np.zeros_like(params[name])),
                         fd[name])
    worst = max(worst, err)
    print(f"  {name:24s} rel err {err:.2e}")
assert worst <= 1e-4
print(f"worst relative error {worst:.2e} (tolerance 1e-4)")

# Gold mode bypasses the mention scorer entirely: its gradients vanish.
_, gold_grads = pair_batch_loss_and_grads(params, store, spans, ai, bi,
                                          labels, "gold")
dead = [n for n in gold_grads if n.startswith("span.ffnn_m.")
        and gold_grads[n].any()]
assert not dead
print("gold mode leaves the mention scorer untouched")
