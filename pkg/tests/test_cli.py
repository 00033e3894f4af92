import csv
import json

import pytest

from regcal.cli import RESULT_COLUMNS, main


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def toy_csv(tmp_path):
    path = tmp_path / "toy.csv"
    assert main(["generate-toy", "--n", "240", "--out", str(path)]) == 0
    return path


def test_generate_toy_deterministic(tmp_path, toy_csv):
    other = tmp_path / "again.csv"
    assert main(["generate-toy", "--n", "240", "--out", str(other)]) == 0
    assert toy_csv.read_bytes() == other.read_bytes()
    rows = read_csv(toy_csv)
    assert len(rows) == 240 and list(rows[0]) == ["x", "y"]
    meta = json.loads((tmp_path / "toy.csv.json").read_text())
    assert meta["params"]["n"] == 240 and meta["params"]["seed"] == 7


def test_generate_toy_bad_params(tmp_path):
    assert main(["generate-toy", "--noise-std", "0", "--out", str(tmp_path / "t.csv")]) == 1
    assert main(["generate-toy", "--mix", "1.5", "--out", str(tmp_path / "t.csv")]) == 1


def test_usage_errors(tmp_path, toy_csv):
    assert main(["run", "--dataset", str(toy_csv), "--method", "nope"]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["run", "--dataset", str(toy_csv), "--folds", "1", "--out", str(tmp_path / "o")]) == 1
    assert main(["sweep", "--dataset", str(toy_csv), "--sweep", "", "--out", str(tmp_path / "o")]) == 1
    assert main(["sweep", "--dataset", str(toy_csv), "--sweep", "8,x", "--out", str(tmp_path / "o")]) == 1
    assert main(["reliability", "--dataset", str(toy_csv), "--methods", "e-beta,bogus", "--out", str(tmp_path / "o")]) == 1


def test_run_outputs(tmp_path, toy_csv):
    out = tmp_path / "run"
    rc = main(["run", "--dataset", str(toy_csv), "--method", "e-beta", "--folds", "5", "--repeats", "1",
               "--train-thresholds", "8", "--predict-thresholds", "64", "--out", str(out)])
    assert rc == 0
    with open(out / "results.csv", newline="") as fh:
        assert next(csv.reader(fh)) == RESULT_COLUMNS
    rows = read_csv(out / "results.csv")
    assert len(rows) == 5 and all(r["error"] == "" for r in rows)
    assert sorted(int(r["fold"]) for r in rows) == list(range(5))
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_folds"] == 5 and summary["config"]["method"] == "e-beta"
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["folds"]) == 5 and all(f["status"] == "ok" for f in manifest["folds"])


def test_sweep_outputs(tmp_path, toy_csv):
    out = tmp_path / "sw"
    rc = main(["sweep", "--dataset", str(toy_csv), "--methods", "e-beta,e-logistic", "--sweep", "8,16",
               "--folds", "2", "--repeats", "1", "--predict-thresholds", "64", "--out", str(out)])
    assert rc == 0
    summary = read_csv(out / "sweep_summary.csv")
    assert [(r["method"], r["K_train"]) for r in summary] == [
        ("e-beta", "8"), ("e-beta", "16"), ("e-logistic", "8"), ("e-logistic", "16")]
    assert len(read_csv(out / "sweep.csv")) == 8


def test_reliability_outputs(tmp_path, toy_csv):
    out = tmp_path / "rel"
    rc = main(["reliability", "--dataset", str(toy_csv), "--method", "none", "--bins", "4", "--folds", "2",
               "--repeats", "1", "--train-thresholds", "8", "--predict-thresholds", "64", "--out", str(out)])
    assert rc == 0
    rows = read_csv(out / "reliability.csv")
    assert 0 < len(rows) <= 4 * 64
    assert {int(r["bin"]) for r in rows} <= set(range(4))
    assert sum(int(r["count"]) for r in rows if r["threshold_index"] == "0") == 240


def test_config_file_and_override(tmp_path, toy_csv, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(f"# experiment\ndataset = {toy_csv}\nmethod = e-logistic\nfolds = 3\nrepeats = 1\n"
                   "train_thresholds = 8\npredict_thresholds = 64\n")
    out = tmp_path / "c"
    assert main(["run", "--config", str(cfg), "--method", "e-beta", "--print-config", "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "method = e-beta" in printed and "folds = 3" in printed
    # the echoed config reproduces the run
    echo = tmp_path / "echo.cfg"
    echo.write_text((out / "config.txt").read_text())
    out2 = tmp_path / "c2"
    assert main(["run", "--config", str(echo), "--out", str(out2)]) == 0
    a = [r["mean_log_likelihood"] for r in read_csv(out / "results.csv")]
    b = [r["mean_log_likelihood"] for r in read_csv(out2 / "results.csv")]
    assert a == b and len(a) == 3
    bad = tmp_path / "bad.cfg"
    bad.write_text("folds: 3\n")
    assert main(["run", "--config", str(bad), "--out", str(out)]) == 1


def test_missing_inputs_are_io_errors(tmp_path, monkeypatch):
    monkeypatch.setenv("REGCAL_DATA_DIR", str(tmp_path))
    assert main(["run", "--dataset", "concrete", "--out", str(tmp_path / "o")]) == 3
    assert main(["run", "--dataset", "no_such_thing", "--out", str(tmp_path / "o")]) == 3
    assert main(["run", "--config", str(tmp_path / "missing.cfg"), "--out", str(tmp_path / "o")]) == 3


def test_partial_failure_exit_code(tmp_path):
    path = tmp_path / "d.csv"
    # a constant target gives a degenerate threshold range in every fold
    path.write_text("x,y\n" + "".join(f"{i},1.0\n" for i in range(40)))
    rc = main(["run", "--dataset", str(path), "--method", "e-beta", "--folds", "2", "--repeats", "1",
               "--train-thresholds", "8", "--predict-thresholds", "64", "--out", str(tmp_path / "o")])
    assert rc == 2
    rows = read_csv(tmp_path / "o" / "results.csv")
    assert len(rows) == 2 and all(r["error"].startswith("DegenerateRange") for r in rows)
