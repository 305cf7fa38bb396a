"""Agglomerative coreference clustering and document pre-clustering.

Mention clustering is average-linkage (UPGMA) agglomeration over pairwise
similarities sigmoid(s(i,j)), merging while the best inter-cluster average
is >= tau. Linkage values are maintained incrementally (Lance-Williams
update for unweighted averages). A brute-force oracle re-derives the result
from first principles for small inputs; it exists for tests only.

Document pre-clustering approximates the external preprocessing the engine
expects: TF-IDF vectors and k-means with k = twice the number of topics.
An externally supplied assignment CSV bypasses it entirely.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.cluster import KMeans
from sklearn.feature_extraction.text import TfidfVectorizer

from .corpus import Corpus

DEFAULT_TAU = 0.75


class AffinityTable:
    """Symmetric similarity matrix over candidates in canonical order."""

    def __init__(self, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError(f"affinity table must be square, got {values.shape}")
        if values.size and not np.array_equal(values, values.T):
            raise ValueError("affinity table must be symmetric")
        off = ~np.eye(values.shape[0], dtype=bool)
        if values.size and (np.any(values[off] < 0.0) or np.any(values[off] > 1.0)):
            raise ValueError("similarities must lie in [0, 1]")
        self.values = values

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass
class ClusterAssignment:
    """Partition of candidate indices into dense cluster ids."""

    labels: np.ndarray  # candidate index -> cluster id, ids dense from 0
    clusters: list[list[int]]  # cluster id -> sorted member indices
    merge_log: list[tuple[int, int, float]] = field(default_factory=list)

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    def as_partition(self) -> frozenset[frozenset[int]]:
        return frozenset(frozenset(c) for c in self.clusters)


def _assignment_from_members(n: int, members: list[list[int]],
                             log: list[tuple[int, int, float]]) -> ClusterAssignment:
    clusters = sorted((sorted(m) for m in members), key=lambda c: c[0])
    labels = np.empty(n, dtype=np.int64)
    for cid, cluster in enumerate(clusters):
        for idx in cluster:
            labels[idx] = cid
    return ClusterAssignment(labels, clusters, log)


def agglomerative_cluster(table: AffinityTable | np.ndarray,
                          tau: float = DEFAULT_TAU) -> ClusterAssignment:
    """Merge while the best average linkage is >= tau.

    Ties go to the smallest (slot_a, slot_b) pair, where a cluster's slot is
    its smallest member index; a merged cluster keeps the smaller slot. The
    merge log records (slot_a, slot_b, linkage) for every merge performed.
    """
    if not isinstance(table, AffinityTable):
        table = AffinityTable(table)
    n = len(table)
    if n == 0:
        return ClusterAssignment(np.empty(0, dtype=np.int64), [], [])
    linkage = table.values.astype(np.float64).copy()
    active = np.ones(n, dtype=bool)
    sizes = np.ones(n, dtype=np.int64)
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    log: list[tuple[int, int, float]] = []
    while active.sum() > 1:
        mask = upper & active[:, None] & active[None, :]
        vals = np.where(mask, linkage, -np.inf)
        flat = int(np.argmax(vals))  # row-major first max = smallest (i, j)
        best = vals.flat[flat]
        if best < tau:
            break
        i, j = divmod(flat, n)
        log.append((i, j, float(best)))
        upd = (sizes[i] * linkage[i, :] + sizes[j] * linkage[j, :]) \
            / (sizes[i] + sizes[j])
        linkage[i, :] = upd
        linkage[:, i] = upd
        sizes[i] += sizes[j]
        members[i].extend(members.pop(j))
        active[j] = False
    return _assignment_from_members(n, list(members.values()), log)


def brute_force_cluster(table: AffinityTable | np.ndarray,
                        tau: float = DEFAULT_TAU) -> ClusterAssignment:
    """Exhaustive oracle: explore every greedy-valid merge sequence.

    Recomputes every linkage directly from the original pairwise values (no
    incremental updates) and follows every pair that attains the maximum.
    All sequences must end in the same partition; that partition is
    returned. Only for tests; refuses more than 10 candidates.
    """
    if not isinstance(table, AffinityTable):
        table = AffinityTable(table)
    n = len(table)
    if n > 10:
        raise ValueError(f"brute force oracle limited to 10 candidates, got {n}")
    if n == 0:
        return ClusterAssignment(np.empty(0, dtype=np.int64), [], [])
    values = table.values

    def linkage_of(a: frozenset[int], b: frozenset[int]) -> float:
        block = values[np.ix_(sorted(a), sorted(b))]
        return float(block.mean())

    memo: dict[frozenset[frozenset[int]], frozenset] = {}

    def explore(partition: frozenset[frozenset[int]]) -> frozenset:
        if partition in memo:
            return memo[partition]
        clusters = sorted(partition, key=lambda c: min(c))
        best = -np.inf
        argbest: list[tuple[frozenset, frozenset]] = []
        for x in range(len(clusters)):
            for y in range(x + 1, len(clusters)):
                val = linkage_of(clusters[x], clusters[y])
                if val > best:
                    best = val
                    argbest = [(clusters[x], clusters[y])]
                elif val == best:
                    argbest.append((clusters[x], clusters[y]))
        if best < tau or not argbest:
            result = frozenset([partition])
        else:
            outcomes = set()
            for a, b in argbest:
                merged = (partition - {a, b}) | {a | b}
                outcomes.update(explore(merged))
            result = frozenset(outcomes)
        memo[partition] = result
        return result

    start = frozenset(frozenset([i]) for i in range(n))
    finals = explore(start)
    if len(finals) != 1:
        raise AssertionError(
            f"greedy-valid merge sequences diverge: {len(finals)} outcomes")
    (final,) = finals
    return _assignment_from_members(n, [list(c) for c in final], [])


def cluster_documents(corpus: Corpus, *, k: int | None = None,
                      seed: int = 0) -> dict[str, int]:
    """TF-IDF + k-means document clustering; k defaults to 2 x topics."""
    docs = corpus.documents
    if k is None:
        k = 2 * len(corpus.topics())
    k = max(1, min(k, len(docs)))
    texts = [" ".join(tok.text for tok in d.tokens) for d in docs]
    vectors = TfidfVectorizer(sublinear_tf=True).fit_transform(texts)
    km = KMeans(n_clusters=k, random_state=seed, n_init=10)
    labels = km.fit_predict(vectors)
    return {d.doc_id: int(lab) for d, lab in zip(docs, labels)}


def no_doc_clustering_mode(corpus: Corpus) -> dict[str, int]:
    """Single document cluster: scores every pair across the whole split."""
    return {d.doc_id: 0 for d in corpus.documents}


def document_groups(assignment: dict[str, int]) -> list[list[str]]:
    """Cluster-id order, doc order preserved within each cluster."""
    groups: dict[int, list[str]] = {}
    for doc_id, cid in assignment.items():
        groups.setdefault(cid, []).append(doc_id)
    return [groups[cid] for cid in sorted(groups)]


def write_assignment_csv(path: str | Path, assignment: dict[str, int]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["doc_id", "cluster_id"])
        for doc_id, cid in assignment.items():
            writer.writerow([doc_id, cid])


def read_assignment_csv(path: str | Path) -> dict[str, int]:
    out: dict[str, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["doc_id", "cluster_id"]:
            raise ValueError(f"expected header doc_id,cluster_id, got {header}")
        for row in reader:
            if len(row) != 2:
                raise ValueError(f"malformed assignment row {row}")
            doc_id, cid = row
            if doc_id in out:
                raise ValueError(f"document {doc_id!r} assigned twice")
            out[doc_id] = int(cid)
    return out
