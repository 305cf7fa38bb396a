"""Coreference evaluation: MUC, B-cubed, CEAF-e, CoNLL F1, mention detection.

Key (gold) and response (system) are partitions of mention identifiers; a
mention is identified by the exact triple (doc_id, start, end). Mentions
present on one side only (twinless) are kept and scored, which penalizes
both spurious and missed mentions. Ratios with zero denominators evaluate
to 0 and raise a flag in the result so degenerate inputs are visible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

Mention = Hashable
Partition = Sequence[set]

SCOPES = ("combined", "wd", "cd")
SINGLETON_MODES = ("include", "exclude")


@dataclass(frozen=True)
class MetricResult:
    recall: float
    precision: float
    f1: float
    zero_recall_denominator: bool = False
    zero_precision_denominator: bool = False

    def to_json(self) -> dict:
        out = {"recall": self.recall, "precision": self.precision,
               "f1": self.f1}
        if self.zero_recall_denominator:
            out["zero_recall_denominator"] = True
        if self.zero_precision_denominator:
            out["zero_precision_denominator"] = True
        return out


def _ratio(num: float, den: float) -> tuple[float, bool]:
    if den == 0:
        return 0.0, True
    return num / den, False


def _f1(recall: float, precision: float) -> float:
    if recall + precision == 0.0:
        return 0.0
    return 2.0 * recall * precision / (recall + precision)


def _result(rec_num, rec_den, prec_num, prec_den) -> MetricResult:
    recall, zr = _ratio(rec_num, rec_den)
    precision, zp = _ratio(prec_num, prec_den)
    return MetricResult(recall, precision, _f1(recall, precision), zr, zp)


def validate_partition(clusters: Partition, what: str = "partition") -> list[set]:
    seen: set = set()
    out = []
    for cluster in clusters:
        if len(cluster) == 0:
            raise ValueError(f"{what} contains an empty cluster")
        for m in cluster:
            if m in seen:
                raise ValueError(f"{what} repeats mention {m!r}")
            seen.add(m)
        out.append(set(cluster))
    return out


def _mention_to_cluster(clusters: list[set]) -> dict:
    return {m: idx for idx, cluster in enumerate(clusters) for m in cluster}


def muc(key: Partition, response: Partition) -> MetricResult:
    """Link-based metric over minimal missing/extra links.

    Recall numerator per key cluster K is |K| minus the number of pieces K
    falls into under the response (response clusters intersecting K, plus
    one piece per mention missing from the response).
    """
    key = validate_partition(key, "key")
    response = validate_partition(response, "response")

    def side(gold: list[set], system: list[set]) -> tuple[float, float]:
        where = _mention_to_cluster(system)
        num = den = 0
        for cluster in gold:
            partitions = {where[m] for m in cluster if m in where}
            twinless = sum(1 for m in cluster if m not in where)
            num += len(cluster) - (len(partitions) + twinless)
            den += len(cluster) - 1
        return num, den

    rn, rd = side(key, response)
    pn, pd = side(response, key)
    return _result(rn, rd, pn, pd)


def b_cubed(key: Partition, response: Partition) -> MetricResult:
    """Per-mention average of cluster overlap ratios."""
    key = validate_partition(key, "key")
    response = validate_partition(response, "response")

    def side(gold: list[set], system: list[set]) -> tuple[float, float]:
        where = _mention_to_cluster(system)
        total = 0.0
        count = 0
        for cluster in gold:
            for m in cluster:
                if m in where:
                    overlap = len(cluster & system[where[m]])
                    total += overlap / len(cluster)
                count += 1
        return total, count

    rn, rd = side(key, response)
    pn, pd = side(response, key)
    return _result(rn, rd, pn, pd)


def phi4(a: set, b: set) -> float:
    return 2.0 * len(a & b) / (len(a) + len(b))


def ceaf_e(key: Partition, response: Partition) -> MetricResult:
    """Entity-based metric over the optimal one-to-one cluster alignment.

    The alignment maximizes total phi4 similarity; computed with the
    rectangular assignment solver.
    """
    key = validate_partition(key, "key")
    response = validate_partition(response, "response")
    if key and response:
        sim = np.zeros((len(key), len(response)))
        for i, k in enumerate(key):
            for j, r in enumerate(response):
                sim[i, j] = phi4(k, r)
        rows, cols = linear_sum_assignment(-sim)
        total = float(sim[rows, cols].sum())
    else:
        total = 0.0
    return _result(total, len(key), total, len(response))


def conll_f1(muc_f1: float, b_cubed_f1: float, ceaf_e_f1: float) -> float:
    return (muc_f1 + b_cubed_f1 + ceaf_e_f1) / 3.0


def mention_detection(key: Partition, response: Partition) -> MetricResult:
    """Exact-span mention matching."""
    key_mentions = {m for cluster in validate_partition(key, "key")
                    for m in cluster}
    response_mentions = {m for cluster in
                         validate_partition(response, "response")
                         for m in cluster}
    hits = len(key_mentions & response_mentions)
    return _result(hits, len(key_mentions), hits, len(response_mentions))


def project_wd(clusters: Partition) -> list[set]:
    """Split every cluster by document, yielding the within-document view.

    Mention identifiers must be (doc_id, start, end) triples here.
    """
    out: list[set] = []
    for cluster in clusters:
        by_doc: dict = {}
        for m in cluster:
            by_doc.setdefault(m[0], set()).add(m)
        out.extend(by_doc[d] for d in sorted(by_doc))
    return out


def filter_singletons(key: Partition, response: Partition
                      ) -> tuple[list[set], list[set]]:
    """Drop singleton clusters from both sides (OntoNotes-style mode)."""
    return ([set(c) for c in key if len(c) > 1],
            [set(c) for c in response if len(c) > 1])


@dataclass(frozen=True)
class EvalReport:
    muc: MetricResult
    b_cubed: MetricResult
    ceaf_e: MetricResult
    conll_f1: float
    mention_detection: MetricResult
    scope: str
    singleton_mode: str

    def to_json(self) -> dict:
        return {"scope": self.scope, "singleton_mode": self.singleton_mode,
                "muc": self.muc.to_json(), "b_cubed": self.b_cubed.to_json(),
                "ceaf_e": self.ceaf_e.to_json(),
                "conll_f1": self.conll_f1,
                "mention_detection": self.mention_detection.to_json()}


def evaluate(key: Partition, response: Partition, *, scope: str = "combined",
             singleton_mode: str = "include") -> EvalReport:
    """Full metric suite under a scope and singleton-handling mode.

    Scope `wd` projects both sides to within-document clusters before
    scoring; `cd` and `combined` score the clusters as given (the
    cross-document setting always evaluates combined WD+CD links).
    """
    if scope not in SCOPES:
        raise ValueError(f"unknown scope {scope!r}")
    if singleton_mode not in SINGLETON_MODES:
        raise ValueError(f"unknown singleton mode {singleton_mode!r}")
    key = validate_partition(key, "key")
    response = validate_partition(response, "response")
    detection = mention_detection(key, response)
    if scope == "wd":
        key = project_wd(key)
        response = project_wd(response)
    if singleton_mode == "exclude":
        key, response = filter_singletons(key, response)
    m = muc(key, response)
    b = b_cubed(key, response)
    c = ceaf_e(key, response)
    return EvalReport(m, b, c, conll_f1(m.f1, b.f1, c.f1), detection,
                      scope, singleton_mode)
