import json

import pytest

from gazecomp.cli import main
from gazecomp.config import RunConfig, load_config, tiny_config
from gazecomp.reports import read_csv

from cliflow import last_json, run, run_pipeline, tree_bytes

EXPECTED = {
    "benchmark/manifest.json", "loss_curve.csv", "epoch_losses.csv", "model.gzck",
    "scores/heatmap-test.json", "metrics.json", "metrics.csv", "f1_threshold.csv", "action_types.csv",
    "analysis.json", "f1_threshold.svg", "roc.svg", "score_hist.svg", "action_types.svg",
}


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    return run_pipeline(tmp_path_factory.mktemp("cli") / "run")


def test_pipeline_outputs(tiny_run):
    files = set(tree_bytes(tiny_run))
    assert EXPECTED <= files
    assert not [f for f in files if ".staging-" in f]
    rows, cfg, version = read_csv(tiny_run / "metrics.csv")
    assert RunConfig.from_dict(cfg) == tiny_config()
    assert 0.0 <= rows[0]["auc"] <= 1.0


def test_every_artifact_embeds_the_config(tiny_run):
    run = tiny_config()
    for name in ("metrics.json", "analysis.json", "scores/heatmap-test.json", "benchmark/manifest.json"):
        doc = json.loads((tiny_run / name).read_text())
        assert RunConfig.from_dict(doc) == run, name
    for name in ("loss_curve.csv", "f1_threshold.csv", "action_types.csv"):
        assert RunConfig.from_dict(read_csv(tiny_run / name)[1]) == run
    assert load_config(tiny_run / "model.gzck") == run


def test_eval_prints_summary(tiny_run, capsys):
    assert run(tiny_run, "eval") == 0
    out = last_json(capsys.readouterr().out)
    assert out["command"] == "eval" and "auc" in out


def test_other_scoring_functions(tiny_run, capsys):
    for fid in ("euclidean", "dtw", "entropy"):
        assert run(tiny_run, "score", "--scoring", fid) == 0
        assert (tiny_run / "scores" / f"{fid}-test.json").exists()
    assert (tiny_run / "scores" / "heatmap-test.json").exists()


def test_usage_errors_exit_2(capsys):
    assert main(["frobnicate"]) == 2
    assert main(["train", "--fusion-mode", "late"]) == 2


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0


def test_checkpoint_mismatch_exits_1(tiny_run, capsys):
    rc = run(tiny_run, "eval", "--fusion-mode", "none")
    assert rc == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "config_mismatch" and "fusion_mode" in err["message"]


def test_benchmark_mismatch_exits_1(tiny_run, capsys):
    rc = run(tiny_run, "train", "--seed", "5", "--checkpoint", str(tiny_run / "other.gzck"))
    assert rc == 1
    assert json.loads(capsys.readouterr().err.strip())["error"] == "config_mismatch"
    assert not (tiny_run / "other.gzck").exists()


def test_missing_benchmark_exits_1(tmp_path, capsys):
    assert run(tmp_path / "empty", "train") == 1
    assert "error" in json.loads(capsys.readouterr().err.strip())


def test_corrupt_checkpoint_reports_kind(tiny_run, tmp_path, capsys):
    bad = tmp_path / "bad.gzck"
    blob = bytearray((tiny_run / "model.gzck").read_bytes())
    blob[-1] ^= 1
    bad.write_bytes(bytes(blob))
    assert run(tiny_run, "eval", "--checkpoint", str(bad)) == 1
    assert json.loads(capsys.readouterr().err.strip())["error"] == "checksum"


def test_failed_command_leaves_no_partial_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    assert run(out, "generate") == 0
    (out / "model.gzck").write_bytes(b"GZCK garbage")
    before = tree_bytes(out)
    assert run(out, "report") == 1
    assert tree_bytes(out) == before
    assert [p.name for p in out.iterdir() if p.name.startswith(".staging-")] == []


def test_config_replay_from_artifact(tiny_run, tmp_path, capsys):
    replay = tmp_path / "replay"
    assert main(["generate", "--config", str(tiny_run / "metrics.json"), "--out", str(replay)]) == 0
    assert main(["train", "--config", str(tiny_run / "model.gzck"), "--out", str(replay)]) == 0
    assert (replay / "model.gzck").read_bytes() == (tiny_run / "model.gzck").read_bytes()


def test_sweep_tiny(tiny_run, capsys):
    assert run(tiny_run, "sweep") == 0
    rows, _, _ = read_csv(tiny_run / "ablation.csv")
    assert {(r["fusion"], r["scoring"]) for r in rows} >= {("both", "heatmap"), ("none", "dtw"),
                                                           ("random", "random")}
    lengths, _, _ = read_csv(tiny_run / "prediction_length.csv")
    assert [r["prediction_length"] for r in lengths] == [2, 4]


def test_two_runs_bit_identical(tiny_run, tmp_path):
    other = run_pipeline(tmp_path / "again")
    a, b = tree_bytes(tiny_run), tree_bytes(other)
    for name in b:
        assert a[name] == b[name], name
