"""Workspace-level pipeline: the operations behind the CLI subcommands.

A workspace is a directory holding the corpus, the embedding file, and every
artifact a command produces. Each command writes a manifest
(manifest-<command>.json) recording the resolved config, sha256 digests of
its inputs, the package version, wall-clock timings, and the artifacts it
wrote. Manifests are the only artifacts containing timings; reports and
checkpoints are byte-identical across reruns with the same inputs and seed.
All paths stored in artifacts are workspace-relative.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .clustering import (cluster_documents, document_groups,
                         no_doc_clustering_mode, read_assignment_csv,
                         write_assignment_csv)
from .conll_io import write_conll
from .corpus import (Corpus, CorpusValidationError, load_corpus, save_corpus,
                     select_mentions)
from .embeddings import (EmbeddingFormatError, EmbeddingStore,
                         load_embeddings, save_embeddings)
from .metrics import evaluate
from .model import (CheckpointError, HyperParams, init_model,
                    load_checkpoint, quantize_f32, save_checkpoint)
from .synthetic import SynthConfig, make_workspace
from .training import (TrainConfig, ablation_suite, pretrain_mention_scorer,
                       predict_clusters, train)

WORKSPACE_INDEX = "workspace.json"


class UserError(Exception):
    """Bad input from the user: missing/invalid files or arguments."""


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def config_to_dict(config: TrainConfig) -> dict:
    return dataclasses.asdict(config.resolved())


class Workspace:
    """Paths, input loading, and manifest bookkeeping for one directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        if not self.root.is_dir():
            raise UserError(f"workspace directory {self.root} does not exist")

    def path(self, name: str) -> Path:
        return self.root / name

    def load_index(self) -> dict:
        index = self.path(WORKSPACE_INDEX)
        if not index.exists():
            raise UserError(
                f"{WORKSPACE_INDEX} not found in {self.root}; run prepare first")
        return json.loads(index.read_text(encoding="utf-8"))

    def load_inputs(self) -> tuple[Corpus, EmbeddingStore]:
        index = self.load_index()
        corpus = load_corpus(self.path(index["corpus"]))
        store = load_embeddings(self.path(index["embeddings"]))
        store.validate_against(corpus)
        return corpus, store

    def input_digests(self, names: list[str]) -> dict[str, str]:
        out = {}
        for name in names:
            p = self.path(name)
            if p.exists():
                out[name] = sha256_file(p)
        return out

    def write_manifest(self, command: str, config: dict | None,
                       inputs: list[str], seed: int | None,
                       timings: dict[str, float], artifacts: list[str]) -> str:
        name = f"manifest-{command}.json"
        payload = {
            "command": command,
            "version": __version__,
            "config": config,
            "seed": seed,
            "input_digests": self.input_digests(inputs),
            "timings_seconds": {k: round(v, 3) for k, v in timings.items()},
            "artifacts": artifacts,
        }
        write_json(self.path(name), payload)
        return name


def _load_required_checkpoint(ws: Workspace, name: str):
    path = ws.path(name)
    if not path.exists():
        raise UserError(f"checkpoint required: {name} not found in {ws.root}")
    try:
        return load_checkpoint(path)
    except CheckpointError as exc:
        raise UserError(f"cannot load checkpoint {name}: {exc}") from exc


def cmd_prepare(ws: Workspace, corpus_path: str, embeddings_path: str) -> dict:
    """Cross-validate corpus and embeddings; write the workspace index.

    Both paths are interpreted relative to the workspace directory and are
    stored as given so the workspace stays relocatable.
    """
    started = time.perf_counter()
    try:
        corpus = load_corpus(ws.path(corpus_path))
    except (FileNotFoundError, CorpusValidationError) as exc:
        raise UserError(f"corpus: {exc}") from exc
    try:
        store = load_embeddings(ws.path(embeddings_path))
        store.validate_against(corpus)
    except (FileNotFoundError, EmbeddingFormatError) as exc:
        raise UserError(f"embeddings: {exc}") from exc
    index = {
        "corpus": corpus_path,
        "embeddings": embeddings_path,
        "dim": store.dim,
        "documents": len(corpus.documents),
        "tokens": sum(d.n_tokens for d in corpus.documents),
        "mentions": len(corpus.mentions),
        "topics": len(corpus.topics()),
    }
    write_json(ws.path(WORKSPACE_INDEX), index)
    ws.write_manifest("prepare", None, [corpus_path, embeddings_path], None,
                      {"prepare": time.perf_counter() - started},
                      [WORKSPACE_INDEX])
    return index


def cmd_synth(ws: Workspace, synth: SynthConfig) -> dict:
    """Generate a synthetic corpus + embeddings and prepare the workspace."""
    started = time.perf_counter()
    corpus, store = make_workspace(synth)
    save_corpus(corpus, ws.path("corpus.json"))
    save_embeddings(store, ws.path("embeddings.cdce"))
    index = cmd_prepare(ws, "corpus.json", "embeddings.cdce")
    ws.write_manifest("synth", dataclasses.asdict(synth),
                      ["corpus.json", "embeddings.cdce"], synth.seed,
                      {"synth": time.perf_counter() - started},
                      ["corpus.json", "embeddings.cdce", WORKSPACE_INDEX])
    return index


def _split_corpus(corpus: Corpus, split: str) -> Corpus:
    try:
        return corpus.split(split)
    except (CorpusValidationError, ValueError) as exc:
        raise UserError(str(exc)) from exc


def cmd_cluster_docs(ws: Workspace, split: str, k: int | None, seed: int,
                     assignment_csv: str | None = None) -> str:
    """Write doc_clusters-<split>.csv from k-means or an external file."""
    started = time.perf_counter()
    corpus, _ = ws.load_inputs()
    part = _split_corpus(corpus, split)
    if assignment_csv is not None:
        try:
            assignment = read_assignment_csv(ws.path(assignment_csv))
        except (FileNotFoundError, ValueError) as exc:
            raise UserError(f"assignment file: {exc}") from exc
        missing = [d.doc_id for d in part.documents if d.doc_id not in assignment]
        if missing:
            raise UserError(f"assignment file misses documents {missing}")
        assignment = {d.doc_id: assignment[d.doc_id] for d in part.documents}
    else:
        assignment = cluster_documents(part, k=k, seed=seed)
    out = f"doc_clusters-{split}.csv"
    write_assignment_csv(ws.path(out), assignment)
    ws.write_manifest("cluster-docs", {"split": split, "k": k, "seed": seed,
                                       "external": assignment_csv},
                      [WORKSPACE_INDEX], seed,
                      {"cluster_docs": time.perf_counter() - started}, [out])
    return out


def cmd_pretrain(ws: Workspace, config: TrainConfig) -> str:
    """Pre-train the mention scorer alone; writes pretrain.cdcm + log."""
    started = time.perf_counter()
    corpus, store = ws.load_inputs()
    config = config.resolved()
    hyper = HyperParams(store.dim, config.max_span_width, config.width_dim,
                        config.hidden)
    params = init_model(hyper, np.random.default_rng([config.seed, 0]))
    history = pretrain_mention_scorer(corpus, store, config, params)
    save_checkpoint(ws.path("pretrain.cdcm"), quantize_f32(params), hyper)
    log_lines = [f"pretrain epoch {r['epoch']}: loss {r['loss']:.6f} "
                 f"dev_span_recall {r['dev_span_recall']:.6f} "
                 f"({r['seconds']:.1f}s)" for r in history]
    ws.path("pretrain_log.txt").write_text("\n".join(log_lines) + "\n",
                                           encoding="utf-8")
    ws.write_manifest("pretrain", config_to_dict(config),
                      [WORKSPACE_INDEX], config.seed,
                      {"pretrain": time.perf_counter() - started},
                      ["pretrain.cdcm", "pretrain_log.txt"])
    return "pretrain.cdcm"


def cmd_train(ws: Workspace, config: TrainConfig) -> str:
    """Full two-stage training; writes model.cdcm + train_log.txt."""
    started = time.perf_counter()
    corpus, store = ws.load_inputs()
    log_lines: list[str] = []
    result = train(corpus, store, config, log=log_lines.append)
    save_checkpoint(ws.path("model.cdcm"), result.params, result.hyper)
    log_lines.append(f"best epoch {result.best_epoch} "
                     f"dev_conll_f1 {result.best_dev_f1:.6f}")
    ws.path("train_log.txt").write_text("\n".join(log_lines) + "\n",
                                        encoding="utf-8")
    ws.write_manifest("train", config_to_dict(config), [WORKSPACE_INDEX],
                      config.seed,
                      {"train": time.perf_counter() - started},
                      ["model.cdcm", "train_log.txt"])
    print(f"best epoch {result.best_epoch} dev CoNLL F1 {result.best_dev_f1:.4f}")
    return "model.cdcm"


def _adopt_hyper(config: TrainConfig, hyper: HyperParams,
                 store: EmbeddingStore) -> TrainConfig:
    """Architecture comes from the checkpoint; thresholds from the config."""
    if store.dim != hyper.dim:
        raise UserError(f"checkpoint expects dim {hyper.dim}, "
                        f"embeddings have dim {store.dim}")
    return dataclasses.replace(config, max_span_width=hyper.max_span_width,
                               width_dim=hyper.width_dim,
                               hidden=hyper.hidden).resolved()


def _doc_groups_for(ws: Workspace, part: Corpus, groups: str,
                    assignment_csv: str | None) -> list[list[str]]:
    if groups == "topics":
        return [[d.doc_id for d in part.documents_of_topic(t)]
                for t in part.topics()]
    if groups == "single":
        return document_groups(no_doc_clustering_mode(part))
    if groups == "csv":
        if assignment_csv is None:
            raise UserError("--assignment is required with --doc-groups csv")
        try:
            assignment = read_assignment_csv(ws.path(assignment_csv))
        except (FileNotFoundError, ValueError) as exc:
            raise UserError(f"assignment file: {exc}") from exc
        known = {d.doc_id for d in part.documents}
        missing = known - set(assignment)
        if missing:
            raise UserError(f"assignment file misses documents {sorted(missing)}")
        return document_groups({d: c for d, c in assignment.items()
                                if d in known})
    raise UserError(f"unknown doc-groups mode {groups!r}")


def _predict_for_split(params, corpus: Corpus, store, config: TrainConfig,
                       ws: Workspace, split: str, groups: str,
                       assignment_csv: str | None, workers: int):
    part = _split_corpus(corpus, split)
    doc_groups = _doc_groups_for(ws, part, groups, assignment_csv)
    if workers > 1 and len(doc_groups) > 1:
        # order-preserving parallel map over independent document groups
        def one(group):
            return predict_clusters(params, part, store, config, [group])[0]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_group = list(pool.map(one, doc_groups))
        response = [c for group_clusters in per_group for c in group_clusters]
    else:
        response, _ = predict_clusters(params, part, store, config, doc_groups)
    return part, response


def cmd_predict(ws: Workspace, config: TrainConfig, split: str,
                groups: str = "topics", assignment_csv: str | None = None,
                checkpoint: str = "model.cdcm", workers: int = 1) -> list[str]:
    """Cluster a split; writes clusters-<split>.json + response-<split>.conll."""
    started = time.perf_counter()
    corpus, store = ws.load_inputs()
    params, hyper, _ = _load_required_checkpoint(ws, checkpoint)
    config = _adopt_hyper(config, hyper, store)
    part, response = _predict_for_split(params, corpus, store, config, ws,
                                        split, groups, assignment_csv, workers)
    clusters_json = {}
    for cid, cluster in enumerate(response):
        members = sorted(cluster, key=lambda k: (part.doc_position(k[0]),
                                                 k[1], k[2]))
        clusters_json[str(cid)] = [{"doc_id": d, "start": s, "end": e}
                                   for d, s, e in members]
    out_json = f"clusters-{split}.json"
    write_json(ws.path(out_json), clusters_json)
    out_conll = f"response-{split}.conll"
    write_conll(ws.path(out_conll), part.documents, response)
    ws.write_manifest("predict", config_to_dict(config),
                      [WORKSPACE_INDEX, checkpoint], config.seed,
                      {"predict": time.perf_counter() - started},
                      [out_json, out_conll])
    return [out_json, out_conll]


def cmd_evaluate(ws: Workspace, config: TrainConfig, split: str,
                 scope: str = "combined", singleton_mode: str = "include",
                 groups: str = "topics", assignment_csv: str | None = None,
                 checkpoint: str = "model.cdcm", workers: int = 1) -> str:
    """Predict and score a split; writes eval-...json and key/response CoNLL."""
    started = time.perf_counter()
    corpus, store = ws.load_inputs()
    params, hyper, _ = _load_required_checkpoint(ws, checkpoint)
    config = _adopt_hyper(config, hyper, store)
    part, response = _predict_for_split(params, corpus, store, config, ws,
                                        split, groups, assignment_csv, workers)
    view = select_mentions(part, config.mode)
    key = view.cluster_sets()
    report = evaluate(key, response, scope=scope, singleton_mode=singleton_mode)
    out = f"eval-{split}-{scope}-{singleton_mode}.json"
    manifest = "manifest-evaluate.json"
    payload = report.to_json()
    payload["split"] = split
    payload["manifest"] = manifest
    write_json(ws.path(out), payload)
    key_conll = f"key-{split}.conll"
    write_conll(ws.path(key_conll), part.documents, key)
    ws.write_manifest("evaluate", config_to_dict(config),
                      [WORKSPACE_INDEX, checkpoint], config.seed,
                      {"evaluate": time.perf_counter() - started},
                      [out, key_conll])
    print(f"{split} {scope} singletons={singleton_mode} "
          f"CoNLL F1: {report.conll_f1:.4f}")
    return out


def cmd_ablate(ws: Workspace, config: TrainConfig,
               seeds: list[int] | None = None) -> str:
    """Run base + ablations for one or more seeds; writes ablation.json."""
    started = time.perf_counter()
    corpus, store = ws.load_inputs()
    seeds = seeds or [config.seed]
    reports = []
    for seed in seeds:
        variant = dataclasses.replace(config, seed=seed)
        reports.append(ablation_suite(corpus, store, variant))
    payload: dict = {"reports": reports, "manifest": "manifest-ablate.json"}
    if len(reports) > 1:
        names = [row["name"] for row in reports[0]["rows"]]
        payload["mean_deltas"] = {
            name: float(np.mean([r["rows"][i]["delta"] for r in reports]))
            for i, name in enumerate(names)}
    write_json(ws.path("ablation.json"), payload)
    ws.write_manifest("ablate", config_to_dict(config), [WORKSPACE_INDEX],
                      config.seed,
                      {"ablate": time.perf_counter() - started},
                      ["ablation.json"])
    return "ablation.json"
