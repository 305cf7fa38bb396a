"""Average-linkage agglomerative clustering, step by step."""

import numpy as np

from cdcoref.clustering import agglomerative_cluster, brute_force_cluster

# Pairwise affinities for five mentions. Clustering merges the best pair,
# then re-scores merged clusters as the average of their members' values,
# and keeps going while the best linkage stays at or above tau.
values = np.array([
    [1.00, 0.90, 0.20, 0.15, 0.10],
    [0.90, 1.00, 0.30, 0.20, 0.15],
    [0.20, 0.30, 1.00, 0.85, 0.80],
    [0.15, 0.20, 0.85, 1.00, 0.70],
    [0.10, 0.15, 0.80, 0.70, 1.00],
])

result = agglomerative_cluster(values, tau=0.5)
print("clusters:", result.clusters)
for a, b, linkage in result.merge_log:
    print(f"  merged slots {a} and {b} at linkage {linkage:.4f}")

# The exhaustive oracle tries every greedy-valid merge sequence and agrees
# with the fast implementation on untied tables.
oracle = brute_force_cluster(values, tau=0.5)
assert oracle.as_partition() == result.as_partition()
print("brute-force oracle agrees")

# Raising tau can only refine the partition: every cluster found at a
# higher threshold sits inside some cluster from a lower threshold.
for tau in (0.3, 0.5, 0.75, 0.9):
    parts = agglomerative_cluster(values, tau=tau).clusters
    print(f"tau {tau:.2f}: {parts}")

# A merge happens at exactly tau (the comparison is >=, not >).
pair = np.array([[1.0, 0.75], [0.75, 1.0]])
assert agglomerative_cluster(pair, tau=0.75).n_clusters == 1
print("boundary linkage merges at tau")

# Random stress test: fast and exhaustive paths agree on 50 random tables.
rng = np.random.default_rng(7)
for _ in range(50):
    n = int(rng.integers(2, 7))
    table = rng.uniform(0, 1, size=(n, n))
    table = (table + table.T) / 2
    np.fill_diagonal(table, 1.0)
    fast = agglomerative_cluster(table, tau=0.6)
    slow = brute_force_cluster(table, tau=0.6)
    assert fast.as_partition() == slow.as_partition()
print("50 random tables: implementations agree")
