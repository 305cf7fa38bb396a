"""End-to-end tests for the command-line pipeline.

Commands run in-process through cli.main() so exit codes and artifacts can
be asserted cheaply. One test goes through the installed console script to
make sure the entry point itself works.
"""

import json
import subprocess
import sys

import pytest

from cdcoref.cli import main, parse_config_file
from cdcoref.pipeline import UserError

SYNTH_ARGS = ["--topics", "3", "--sentences", "2", "--dim", "16",
              "--clusters-per-subtopic", "4", "--vocab", "12",
              "--signal", "1.0", "--noise", "0.1"]
TRAIN_ARGS = ["--mode", "all", "--mentions", "gold", "--hidden", "16",
              "--epochs", "2", "--learning-rate", "3e-3", "--seed", "1"]


def run_cli(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def trained_ws(tmp_path_factory):
    """A synthetic workspace with a trained gold-mode model."""
    ws = tmp_path_factory.mktemp("ws")
    assert run_cli("synth", "--workspace", ws, *SYNTH_ARGS) == 0
    assert run_cli("train", "--workspace", ws, *TRAIN_ARGS) == 0
    return ws


def test_synth_writes_workspace(tmp_path):
    assert run_cli("synth", "--workspace", tmp_path, *SYNTH_ARGS) == 0
    for name in ("corpus.json", "embeddings.cdce", "workspace.json",
                 "manifest-synth.json", "manifest-prepare.json"):
        assert (tmp_path / name).exists(), name
    index = json.loads((tmp_path / "workspace.json").read_text())
    assert index["dim"] == 16
    assert index["documents"] == 12
    manifest = json.loads((tmp_path / "manifest-synth.json").read_text())
    assert manifest["command"] == "synth"
    assert "corpus.json" in manifest["input_digests"]
    assert "timings_seconds" in manifest


def test_prepare_rejects_missing_inputs(tmp_path):
    code = run_cli("prepare", "--workspace", tmp_path,
                   "--corpus", "nope.json", "--embeddings", "nope.cdce")
    assert code == 2


def test_missing_workspace_is_user_error(tmp_path):
    code = run_cli("train", "--workspace", tmp_path / "absent", *TRAIN_ARGS)
    assert code == 2


def test_corrupt_corpus_is_internal_error(tmp_path):
    assert run_cli("synth", "--workspace", tmp_path, *SYNTH_ARGS) == 0
    (tmp_path / "corpus.json").write_text("{not json", encoding="utf-8")
    code = run_cli("train", "--workspace", tmp_path, *TRAIN_ARGS)
    assert code == 1


def test_cluster_docs_and_external_assignment(tmp_path):
    assert run_cli("synth", "--workspace", tmp_path, *SYNTH_ARGS) == 0
    assert run_cli("cluster-docs", "--workspace", tmp_path,
                   "--split", "test") == 0
    out = tmp_path / "doc_clusters-test.csv"
    assert out.exists()
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "doc_id,cluster_id"
    # 1 test topic x 2 subtopics x 2 docs
    assert len(lines) == 1 + 4

    # external assignments are used verbatim
    ext = tmp_path / "mine.csv"
    rows = ["doc_id,cluster_id"] + [f"{line.split(',')[0]},7"
                                    for line in lines[1:]]
    ext.write_text("\n".join(rows) + "\n", encoding="utf-8")
    assert run_cli("cluster-docs", "--workspace", tmp_path, "--split", "test",
                   "--assignment", "mine.csv") == 0
    redone = (tmp_path / "doc_clusters-test.csv").read_text()
    assert all(line.endswith(",7") for line in redone.strip().splitlines()[1:])

    # assignments must cover every document of the split
    ext.write_text("\n".join(rows[:-1]) + "\n", encoding="utf-8")
    assert run_cli("cluster-docs", "--workspace", tmp_path, "--split", "test",
                   "--assignment", "mine.csv") == 2


def test_pretrain_writes_checkpoint_and_log(tmp_path):
    assert run_cli("synth", "--workspace", tmp_path, *SYNTH_ARGS) == 0
    code = run_cli("pretrain", "--workspace", tmp_path, "--mode", "all",
                   "--mentions", "predicted", "--hidden", "16",
                   "--pretrain-epochs", "2", "--seed", "1")
    assert code == 0
    assert (tmp_path / "pretrain.cdcm").exists()
    log = (tmp_path / "pretrain_log.txt").read_text()
    assert "dev_span_recall" in log


def test_train_is_byte_deterministic(trained_ws):
    first = (trained_ws / "model.cdcm").read_bytes()
    assert run_cli("train", "--workspace", trained_ws, *TRAIN_ARGS) == 0
    assert (trained_ws / "model.cdcm").read_bytes() == first
    log = (trained_ws / "train_log.txt").read_text()
    assert "best epoch" in log
    manifest = json.loads((trained_ws / "manifest-train.json").read_text())
    assert manifest["config"]["epochs"] == 2
    assert manifest["seed"] == 1


def test_predict_writes_clusters_and_conll(trained_ws):
    assert run_cli("predict", "--workspace", trained_ws, "--split", "dev",
                   *TRAIN_ARGS) == 0
    clusters = json.loads((trained_ws / "clusters-dev.json").read_text())
    assert clusters, "dev predictions should not be empty"
    spans = [m for cluster in clusters.values() for m in cluster]
    assert all(set(m) == {"doc_id", "start", "end"} for m in spans)
    conll = (trained_ws / "response-dev.conll").read_text()
    assert conll.startswith("#begin document")
    assert conll.rstrip().endswith("#end document")


def test_predict_requires_checkpoint(tmp_path):
    assert run_cli("synth", "--workspace", tmp_path, *SYNTH_ARGS) == 0
    assert run_cli("predict", "--workspace", tmp_path, "--split", "dev",
                   *TRAIN_ARGS) == 2


def test_evaluate_report_and_worker_invariance(trained_ws):
    assert run_cli("evaluate", "--workspace", trained_ws, "--split", "dev",
                   *TRAIN_ARGS) == 0
    out = trained_ws / "eval-dev-combined-include.json"
    report = json.loads(out.read_text())
    for metric in ("muc", "b_cubed", "ceaf_e", "mention_detection"):
        assert 0.0 <= report[metric]["f1"] <= 1.0
    assert 0.0 <= report["conll_f1"] <= 1.0
    assert report["split"] == "dev"
    first = out.read_bytes()

    # parallel document groups must not change any output byte
    assert run_cli("evaluate", "--workspace", trained_ws, "--split", "dev",
                   "--workers", "3", *TRAIN_ARGS) == 0
    assert out.read_bytes() == first

    assert run_cli("evaluate", "--workspace", trained_ws, "--split", "dev",
                   "--singletons", "exclude", "--scope", "wd",
                   *TRAIN_ARGS) == 0
    assert (trained_ws / "eval-dev-wd-exclude.json").exists()


def test_evaluate_with_assignment_csv(trained_ws):
    assert run_cli("cluster-docs", "--workspace", trained_ws,
                   "--split", "dev", "--k", "2") == 0
    assert run_cli("evaluate", "--workspace", trained_ws, "--split", "dev",
                   "--doc-groups", "csv", "--assignment",
                   "doc_clusters-dev.csv", *TRAIN_ARGS) == 0
    # csv mode without --assignment is an input error
    assert run_cli("evaluate", "--workspace", trained_ws, "--split", "dev",
                   "--doc-groups", "csv", *TRAIN_ARGS) == 2


def test_ablate_multi_seed_mean_deltas(tmp_path):
    assert run_cli("synth", "--workspace", tmp_path, *SYNTH_ARGS) == 0
    code = run_cli("ablate", "--workspace", tmp_path, "--seeds", "1,2",
                   "--mode", "all", "--mentions", "gold", "--hidden", "16",
                   "--epochs", "1", "--seed", "1")
    assert code == 0
    payload = json.loads((tmp_path / "ablation.json").read_text())
    assert len(payload["reports"]) == 2
    names = [row["name"] for row in payload["reports"][0]["rows"]]
    assert names == ["base", "no_pretrain", "frozen_pruning",
                     "no_neg_sampling"]
    assert set(payload["mean_deltas"]) == set(names)
    assert payload["mean_deltas"]["base"] == 0.0


def test_config_file_and_flag_overrides(tmp_path):
    assert run_cli("synth", "--workspace", tmp_path, *SYNTH_ARGS) == 0
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nmode = all\nmention-mode = gold\n"
                   "hidden = 16\nepochs = 1\nseed = 5\n", encoding="utf-8")
    assert run_cli("train", "--workspace", tmp_path, "--config", cfg) == 0
    manifest = json.loads((tmp_path / "manifest-train.json").read_text())
    assert manifest["config"]["hidden"] == 16
    assert manifest["seed"] == 5
    # flags win over the file
    assert run_cli("train", "--workspace", tmp_path, "--config", cfg,
                   "--seed", "9") == 0
    manifest = json.loads((tmp_path / "manifest-train.json").read_text())
    assert manifest["seed"] == 9


def test_config_file_errors(tmp_path):
    assert run_cli("synth", "--workspace", tmp_path, *SYNTH_ARGS) == 0
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("junk line\n", encoding="utf-8")
    assert run_cli("train", "--workspace", tmp_path, "--config", cfg) == 2
    cfg.write_text("not_a_key = 3\n", encoding="utf-8")
    assert run_cli("train", "--workspace", tmp_path, "--config", cfg) == 2
    cfg.write_text("epochs = many\n", encoding="utf-8")
    assert run_cli("train", "--workspace", tmp_path, "--config", cfg) == 2
    assert run_cli("train", "--workspace", tmp_path,
                   "--config", "missing.cfg") == 2
    cfg.write_text("no equals sign\n", encoding="utf-8")
    with pytest.raises(UserError, match="expected key = value"):
        parse_config_file(cfg)


def test_parse_config_file_values(tmp_path):
    cfg = tmp_path / "v.cfg"
    cfg.write_text("a = 1 # trailing comment\n\nb=x y\n", encoding="utf-8")
    assert parse_config_file(cfg) == {"a": "1", "b": "x y"}


def test_console_script_help():
    proc = subprocess.run([sys.executable, "-m", "cdcoref.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "prepare" in proc.stdout and "ablate" in proc.stdout
