"""Command-line interface.

Subcommands: prepare, cluster-docs, pretrain, train, predict, evaluate,
ablate, synth. Every command runs inside a workspace directory (--workspace,
default "."). Training hyperparameters can come from a config file of
`key = value` lines (--config); command-line flags override file values.
Exit codes: 0 success, 1 internal error, 2 input error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import traceback
from pathlib import Path

from . import pipeline
from .pipeline import UserError, Workspace
from .synthetic import SynthConfig
from .training import TrainConfig

_TRAIN_HELP = {
    "mode": "mention types to resolve: event, entity, or all",
    "mention_mode": "gold (use annotated spans) or predicted (detect spans)",
    "batch_size": "mention pairs per gradient step",
    "dropout": "dropout rate on hidden layers during training",
    "learning_rate": "Adam learning rate",
    "hidden": "hidden layer width of both FFNNs",
    "width_dim": "span width embedding dimension",
    "max_span_width": "max candidate span width (default per mode: 10/15/15)",
    "lam": "pruning coefficient lambda (default per mode: 0.25/0.35/0.4)",
    "tau": "agglomerative clustering stop threshold on probabilities",
    "neg_ratio": "negative pairs sampled per positive pair",
    "epochs": "joint training epochs",
    "pretrain_epochs": "mention scorer pre-training epoch budget",
    "patience": "pre-training early-stop patience (dev span recall)",
    "seed": "master random seed",
    "no_pretrain": "ablation: skip mention scorer pre-training",
    "frozen_pruning": "ablation: freeze mention scorer and candidate sets",
    "no_neg_sampling": "ablation: train on all negative pairs",
}

_FLAG_ALIASES = {"mention_mode": "--mentions"}


def _add_train_config_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group(
        "training configuration",
        "each key may also appear in the --config file; flags win")
    for f in dataclasses.fields(TrainConfig):
        flag = _FLAG_ALIASES.get(f.name, "--" + f.name.replace("_", "-"))
        help_text = _TRAIN_HELP[f.name]
        if f.type == "bool":
            group.add_argument(flag, dest=f.name, action="store_const",
                               const=True, default=None, help=help_text)
        else:
            group.add_argument(flag, dest=f.name, default=None,
                               help=help_text)


def parse_config_file(path: Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UserError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


_FIELD_TYPES = {"mode": str, "mention_mode": str, "batch_size": int,
                "dropout": float, "learning_rate": float, "hidden": int,
                "width_dim": int, "max_span_width": int, "lam": float,
                "tau": float, "neg_ratio": float, "epochs": int,
                "pretrain_epochs": int, "patience": int, "seed": int,
                "no_pretrain": bool, "frozen_pruning": bool,
                "no_neg_sampling": bool}


def _parse_value(key: str, value, kind):
    if isinstance(value, kind):
        return value
    text = str(value).strip()
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        return kind(text)
    except ValueError as exc:
        raise UserError(f"config key {key}: {exc}") from exc


def build_train_config(args: argparse.Namespace) -> TrainConfig:
    values: dict = {}
    config_path = getattr(args, "config", None)
    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise UserError(f"config file {path} not found")
        for key, text in parse_config_file(path).items():
            if key not in _FIELD_TYPES:
                raise UserError(f"unknown config key {key!r}")
            values[key] = _parse_value(key, text, _FIELD_TYPES[key])
    for key, kind in _FIELD_TYPES.items():
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            values[key] = _parse_value(key, flag_value, kind)
    try:
        return TrainConfig(**values).resolved()
    except ValueError as exc:
        raise UserError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdcoref",
        description="Cross-document coreference over frozen token embeddings.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, train_args: bool = True):
        p.add_argument("--workspace", default=".",
                       help="workspace directory (default: current)")
        if train_args:
            p.add_argument("--config", default=None,
                           help="key = value config file")
            _add_train_config_args(p)

    p = sub.add_parser("prepare", help="validate corpus + embeddings, "
                                       "write the workspace index")
    common(p, train_args=False)
    p.add_argument("--corpus", required=True,
                   help="corpus JSON path, relative to the workspace")
    p.add_argument("--embeddings", required=True,
                   help="embedding file path, relative to the workspace")

    p = sub.add_parser("synth", help="generate a synthetic workspace")
    common(p, train_args=False)
    p.add_argument("--topics", type=int, default=5)
    p.add_argument("--subtopics", type=int, default=2)
    p.add_argument("--docs-per-subtopic", type=int, default=2)
    p.add_argument("--sentences", type=int, default=3)
    p.add_argument("--sentence-len", type=int, default=10)
    p.add_argument("--mentions-per-sentence", type=int, default=3)
    p.add_argument("--clusters-per-subtopic", type=int, default=6)
    p.add_argument("--singletons-per-subtopic", type=int, default=1)
    p.add_argument("--vocab", type=int, default=30)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--signal", type=float, default=0.9)
    p.add_argument("--noise", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--dev-topics", type=int, default=1)
    p.add_argument("--test-topics", type=int, default=1)
    p.add_argument("--ambiguous-splits", default="",
                   help="comma-separated splits whose subtopics share "
                        "latent directions (e.g. test)")

    p = sub.add_parser("cluster-docs", help="document pre-clustering "
                                            "(TF-IDF + k-means)")
    common(p, train_args=False)
    p.add_argument("--split", default="test",
                   choices=("train", "dev", "test"))
    p.add_argument("--k", type=int, default=None,
                   help="cluster count (default: 2 x topics)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--assignment", default=None,
                   help="external doc_id,cluster_id CSV to use verbatim")

    p = sub.add_parser("pretrain", help="pre-train the mention scorer only")
    common(p)

    p = sub.add_parser("train", help="two-stage training with dev selection")
    common(p)

    p = sub.add_parser("predict", help="cluster a split with a trained model")
    common(p)
    _add_predict_args(p)

    p = sub.add_parser("evaluate", help="predict and score a split")
    common(p)
    _add_predict_args(p)
    p.add_argument("--scope", default="combined",
                   choices=("combined", "wd", "cd"))
    p.add_argument("--singletons", default="include",
                   choices=("include", "exclude"))

    p = sub.add_parser("ablate", help="base + ablation runs")
    common(p)
    p.add_argument("--seeds", default=None,
                   help="comma-separated seeds (default: the config seed)")
    return parser


def _add_predict_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--split", default="dev", choices=("train", "dev", "test"))
    p.add_argument("--doc-groups", default="topics",
                   choices=("topics", "single", "csv"),
                   help="document grouping: gold topics, one group, or an "
                        "assignment CSV (--assignment)")
    p.add_argument("--assignment", default=None,
                   help="doc_id,cluster_id CSV for --doc-groups csv")
    p.add_argument("--checkpoint", default="model.cdcm")
    p.add_argument("--workers", type=int, default=1,
                   help="parallel document groups (same results any value)")


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "synth":
        Path(args.workspace).mkdir(parents=True, exist_ok=True)
    ws = Workspace(args.workspace)
    if args.command == "prepare":
        pipeline.cmd_prepare(ws, args.corpus, args.embeddings)
        return 0
    if args.command == "synth":
        ambiguous = tuple(s for s in args.ambiguous_splits.split(",") if s)
        cfg = SynthConfig(
            n_topics=args.topics, subtopics_per_topic=args.subtopics,
            docs_per_subtopic=args.docs_per_subtopic,
            sentences_per_doc=args.sentences, sentence_len=args.sentence_len,
            mentions_per_sentence=args.mentions_per_sentence,
            clusters_per_subtopic=args.clusters_per_subtopic,
            singletons_per_subtopic=args.singletons_per_subtopic,
            vocab_per_subtopic=args.vocab, dim=args.dim,
            cluster_signal=args.signal, noise_scale=args.noise,
            seed=args.seed, dev_topics=args.dev_topics,
            test_topics=args.test_topics, ambiguous_splits=ambiguous)
        pipeline.cmd_synth(ws, cfg)
        return 0
    if args.command == "cluster-docs":
        pipeline.cmd_cluster_docs(ws, args.split, args.k, args.seed,
                                  args.assignment)
        return 0
    config = build_train_config(args)
    if args.command == "pretrain":
        pipeline.cmd_pretrain(ws, config)
    elif args.command == "train":
        pipeline.cmd_train(ws, config)
    elif args.command == "predict":
        pipeline.cmd_predict(ws, config, args.split, args.doc_groups,
                             args.assignment, args.checkpoint, args.workers)
    elif args.command == "evaluate":
        pipeline.cmd_evaluate(ws, config, args.split, args.scope,
                              args.singletons, args.doc_groups,
                              args.assignment, args.checkpoint, args.workers)
    elif args.command == "ablate":
        seeds = None
        if args.seeds:
            try:
                seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
            except ValueError as exc:
                raise UserError(f"--seeds: {exc}") from exc
        pipeline.cmd_ablate(ws, config, seeds)
    else:  # pragma: no cover - argparse enforces the choices
        raise AssertionError(args.command)
    return 0


def main(argv: list[str] | None = None) -> int:
    try:
        return run(argv)
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
