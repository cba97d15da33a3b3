"""Command-line interface: flags, exit codes, JSON status lines, file outputs."""

import json

import numpy as np
import pytest

from robust_trees.cli import main
from robust_trees.tree import load_tree, predict_batch
from synth import gaussian_blobs, write_csv


@pytest.fixture()
def blob_csv(tmp_path):
    X, y = gaussian_blobs(80, [[-3, 0], [3, 0]], scale=0.6, seed=1)
    path = tmp_path / "blobs.csv"
    write_csv(path, X, y, class_names=["neg", "pos"])
    return path


def run_cli(capsys, *argv) -> tuple[int, dict]:
    code = main(list(argv))
    out = capsys.readouterr().out
    lines = [line for line in out.strip().split("\n") if line]
    assert len(lines) == 1, f"expected exactly one stdout line, got {out!r}"
    return code, json.loads(lines[0])


def run_cli_full(capsys, *argv) -> tuple[int, dict, str]:
    code = main(list(argv))
    captured = capsys.readouterr()
    lines = [line for line in captured.out.strip().split("\n") if line]
    assert len(lines) == 1
    return code, json.loads(lines[0]), captured.err


class TestTrain:
    def test_round_trip(self, blob_csv, tmp_path, capsys):
        model = tmp_path / "model.json"
        code, status = run_cli(
            capsys, "train", "--data", str(blob_csv), "--format", "csv",
            "--criterion", "gini", "--seed", "3", "--out", str(model),
        )
        assert code == 0
        assert status["command"] == "train"
        assert status["train_accuracy"] == 1.0
        assert {"nodes", "leaves", "depth"} <= set(status)
        tree = load_tree(model)
        X, y = gaussian_blobs(80, [[-3, 0], [3, 0]], scale=0.6, seed=1)
        assert (predict_batch(tree, X)[0] == y).all()

    def test_unknown_criterion_exits_2(self, blob_csv, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--data", str(blob_csv), "--format", "csv",
                  "--criterion", "credal", "--out", str(tmp_path / "m.json")])
        assert exc.value.code == 2

    def test_ne_without_lambda_exits_2(self, blob_csv, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--data", str(blob_csv), "--format", "csv",
                  "--criterion", "ne", "--out", str(tmp_path / "m.json")])
        assert exc.value.code == 2

    def test_gce_without_q_exits_2(self, blob_csv, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--data", str(blob_csv), "--format", "csv",
                  "--criterion", "gce", "--out", str(tmp_path / "m.json")])
        assert exc.value.code == 2

    def test_missing_file_exits_1(self, tmp_path, capsys):
        code = main(["train", "--data", str(tmp_path / "nope.csv"), "--format", "csv",
                     "--criterion", "gini", "--out", str(tmp_path / "m.json")])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_forest_training(self, blob_csv, tmp_path, capsys):
        model = tmp_path / "forest.json"
        code, status = run_cli(
            capsys, "train", "--data", str(blob_csv), "--format", "csv",
            "--criterion", "entropy", "--forest", "--trees", "5",
            "--seed", "1", "--out", str(model),
        )
        assert code == 0 and status["model"] == "forest"
        assert json.loads(model.read_text())["params"]["n_trees"] == 5


class TestPredict:
    def test_predict_reports_accuracy(self, blob_csv, tmp_path, capsys):
        model = tmp_path / "model.json"
        main(["train", "--data", str(blob_csv), "--format", "csv",
              "--criterion", "gini", "--out", str(model)])
        capsys.readouterr()
        out_csv = tmp_path / "preds.csv"
        code, status = run_cli(
            capsys, "predict", "--model", str(model), "--data", str(blob_csv),
            "--format", "csv", "--out", str(out_csv),
        )
        assert code == 0
        assert status["accuracy"] == 1.0
        lines = out_csv.read_text().strip().split("\n")
        assert lines[0] == "prediction,p0,p1"
        assert len(lines) == 161


class TestNoiseCommand:
    def test_matrix_and_corrupted_output(self, blob_csv, tmp_path, capsys):
        matrix = tmp_path / "matrix.csv"
        noisy = tmp_path / "noisy.csv"
        code, status = run_cli(
            capsys, "noise", "--data", str(blob_csv), "--format", "csv",
            "--kind", "uniform", "--eta", "0.3", "--seed", "5",
            "--matrix-out", str(matrix), "--out", str(noisy),
        )
        assert code == 0
        assert status["diagonally_dominant"] is True
        assert 0.1 < status["flip_fraction"] < 0.5
        rows = [line.split(",") for line in matrix.read_text().strip().split("\n")]
        assert np.allclose(np.asarray(rows, dtype=float), [[0.7, 0.3], [0.3, 0.7]])
        assert len(noisy.read_text().strip().split("\n")) == 161


class TestTune:
    def test_reports_best_lambda(self, blob_csv, capsys):
        code, status = run_cli(
            capsys, "tune", "--data", str(blob_csv), "--format", "csv",
            "--grid", "0,0.5,1", "--seed", "2",
        )
        assert code == 0
        assert status["best_lambda"] in (0.0, 0.5, 1.0)
        assert set(status["scores"]) == {"0", "0.5", "1"}


def _bench_config(tmp_path, data_path, reps=2):
    config = {
        "dataset": {"path": str(data_path), "format": "csv", "label_column": "label"},
        "split": {"train_fraction": 0.8, "seed": 0},
        "noise": [{"kind": "uniform", "eta": 0.0}, {"kind": "uniform", "eta": 0.4}],
        "criteria": [{"kind": "entropy"}, {"kind": "misclassification"}],
        "model": {"kind": "tree"},
        "replications": reps,
        "seed": 11,
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path


class TestBench:
    def test_row_counts_and_summary(self, blob_csv, tmp_path, capsys):
        config = _bench_config(tmp_path, blob_csv, reps=2)
        out = tmp_path / "results.csv"
        code, status = run_cli(capsys, "bench", "--config", str(config),
                               "--out", str(out))
        assert code == 0 and status["records"] == 8
        lines = out.read_text().strip().split("\n")
        assert len(lines) == 9  # header + 2 criteria x 2 noises x 2 reps
        summary = (tmp_path / "summary.csv").read_text().strip().split("\n")
        assert summary[0] == "dataset,criterion,noise,replications,mean_accuracy,two_sd"
        assert len(summary) == 5  # header + 4 cells

    def test_byte_identical_across_runs_and_threads(self, blob_csv, tmp_path,
                                                    capsys, monkeypatch):
        config = _bench_config(tmp_path, blob_csv)
        outs = []
        for name, threads in (("a.csv", "1"), ("b.csv", "8"), ("c.csv", "1")):
            monkeypatch.setenv("ROBUST_TREES_THREADS", threads)
            out = tmp_path / name
            assert main(["bench", "--config", str(config), "--out", str(out),
                         "--summary", str(tmp_path / f"s_{name}")]) == 0
            outs.append(out.read_bytes())
        capsys.readouterr()
        assert outs[0] == outs[1] == outs[2]


class TestVerify:
    @pytest.mark.parametrize("suite", ["impurity", "early-stop", "noise"])
    def test_suites_pass(self, suite, capsys):
        code, status = run_cli(capsys, "verify", "--suite", suite, "--seed", "0")
        assert code == 0
        assert status["failures"] == 0
        assert status["checks"] > 0

    def test_fault_injection_fails(self, capsys):
        code, status, err = run_cli_full(capsys, "verify", "--suite", "impurity",
                                         "--inject-fault")
        assert code == 1 and status["failures"] >= 1
        assert "FAIL" in err

    def test_table_goes_to_stderr(self, capsys):
        main(["verify", "--suite", "impurity", "--seed", "1"])
        captured = capsys.readouterr()
        assert "PASS" in captured.err
        assert "PASS" not in captured.out
