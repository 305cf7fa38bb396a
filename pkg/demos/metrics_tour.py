"""A tour of the coreference metric suite on a tiny worked example."""

from cdcoref.metrics import b_cubed, ceaf_e, evaluate, muc, project_wd

# Two gold clusters over five mentions; the system splits one cluster and
# glues the stray mention onto the other. Mentions here are plain strings,
# but any hashable works (the pipeline uses (doc_id, start, end) triples).
key = [{"a", "b", "c"}, {"d", "e"}]
response = [{"a", "b"}, {"c", "d", "e"}]

# MUC counts the minimal links needed to build each cluster.
m = muc(key, response)
print(f"MUC      recall {m.recall:.4f} precision {m.precision:.4f} f1 {m.f1:.4f}")

# B3 averages per-mention overlap ratios instead of links.
b = b_cubed(key, response)
print(f"B3       recall {b.recall:.4f} precision {b.precision:.4f} f1 {b.f1:.4f}")

# CEAF-e aligns clusters one-to-one to maximize total phi4 similarity.
c = ceaf_e(key, response)
print(f"CEAF-e   recall {c.recall:.4f} precision {c.precision:.4f} f1 {c.f1:.4f}")

# The headline number averages the three F1 scores.
report = evaluate(key, response)
print(f"CoNLL F1 {report.conll_f1:.4f}")

# Mention detection is exact-span matching, independent of clustering.
d = report.mention_detection
print(f"mentions recall {d.recall:.4f} precision {d.precision:.4f} f1 {d.f1:.4f}")

# Singletons can be excluded from both sides before scoring; note how the
# response singleton disappears and every score moves.
key2 = [{"a", "b"}, {"c"}]
response2 = [{"a", "b"}, {"c"}]
with_s = evaluate(key2, response2)
without_s = evaluate(key2, response2, singleton_mode="exclude")
print(f"with singletons    CoNLL F1 {with_s.conll_f1:.4f}")
print(f"without singletons CoNLL F1 {without_s.conll_f1:.4f}")

# Within-document scope projects clusters onto each document first. A
# cross-document cluster splits into its per-document fragments.
cd_cluster = [{("doc1", 0, 0), ("doc1", 5, 5), ("doc2", 3, 4)}]
print("wd projection:", sorted(map(sorted, project_wd(cd_cluster))))

# Scoring a partition against itself is always perfect; quick sanity check.
assert evaluate(key, [set(c) for c in key]).conll_f1 == 1.0
print("identity scoring gives 1.0 across the board")
