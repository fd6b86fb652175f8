"""Subcommand round trips and exit codes, driven through main()."""

import json
import os

import numpy as np
import pytest

from misslab.cli import main
from misslab.data import load_matrix_csv, save_csv
from misslab._rng import rng_for


def small_csv(tmp_path, rows=40, cols=3, seed=1):
    path = tmp_path / "data.csv"
    matrix = rng_for(seed, "cli-data").uniform(0.0, 10.0, size=(rows, cols))
    save_csv(path, matrix, [f"c{j}" for j in range(cols)])
    return path, matrix


def write_cfg(tmp_path, out_dir, extra="", name="run.cfg"):
    text = "\n".join([
        "builtin.rows = 200",
        "builtin.features = 4",
        "builtin.components = 2",
        "gmm.k_range = 2",
        "gmm.kinds = spherical",
        "gmm.restarts = 1",
        "gmm.max_iter = 60",
        "synth.n = 150",
        "synth.reserve = 40",
        "missing.degrees = 0.2",
        "imputers = mean",
        "repetitions = 1",
        "copies = 1",
        "classifier.hidden = 6",
        "classifier.epochs = 6",
        "classifier.patience = 6",
        "classifier.batch = 32",
        "classifier.lr = 0.05",
        "generator.epochs = 6",
        "generator.patience = 6",
        "clusters = 2",
        "seed = 5",
        f"output = {out_dir}",
        extra,
    ])
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# induce / impute / evaluate round trip
# ---------------------------------------------------------------------------

def test_induce_impute_evaluate_round_trip(tmp_path, capsys):
    data_path, matrix = small_csv(tmp_path)
    stem = str(tmp_path / "holes")
    assert main(["induce", "--input", str(data_path), "--out", stem,
                 "--scheme", "mcar", "--degree", "0.3", "--seed", "7"]) == 0
    out = capsys.readouterr().out
    assert "masked" in out and f"{stem}.holed.csv" in out
    holed = load_matrix_csv(f"{stem}.holed.csv")
    mask = load_matrix_csv(f"{stem}.mask.csv")
    assert set(np.unique(mask)) <= {0.0, 1.0}
    assert np.array_equal(np.isnan(holed), mask == 1.0)
    assert np.array_equal(holed[mask == 0.0], matrix[mask == 0.0])

    istem = str(tmp_path / "filled")
    assert main(["impute", "--method", "mean", "--input", f"{stem}.holed.csv",
                 "--out", istem, "--seed", "3"]) == 0
    imputed_path = f"{istem}.imputed.mean.0.csv"
    assert os.path.exists(imputed_path)
    assert os.path.exists(f"{istem}.imputed.mean.diagnostics.json")
    imputed = load_matrix_csv(imputed_path)
    assert not np.isnan(imputed).any()
    assert np.array_equal(imputed[mask == 0.0], matrix[mask == 0.0])

    capsys.readouterr()                # drop the impute status line
    metrics_path = tmp_path / "metrics.json"
    assert main(["evaluate", "--truth", str(data_path), "--imputed",
                 imputed_path, "--mask", f"{stem}.mask.csv",
                 "--out", str(metrics_path)]) == 0
    printed = json.loads(capsys.readouterr().out)
    saved = json.loads(metrics_path.read_text(encoding="utf-8"))
    assert printed == saved
    assert set(saved) >= {"rmse", "r2", "mape"}
    assert saved["rmse"] >= 0.0


def test_induce_mar_skips_driver_column(tmp_path):
    data_path, _ = small_csv(tmp_path, rows=80)
    stem = str(tmp_path / "mar")
    assert main(["induce", "--input", str(data_path), "--out", stem,
                 "--scheme", "mar", "--degree", "0.2", "--seed", "2",
                 "--drivers", "0"]) == 0
    mask = load_matrix_csv(f"{stem}.mask.csv")
    assert mask[:, 0].sum() == 0.0
    assert mask[:, 1:].sum() > 0.0


def test_impute_multiple_copies_naming(tmp_path):
    data_path, _ = small_csv(tmp_path)
    stem = str(tmp_path / "h")
    main(["induce", "--input", str(data_path), "--out", stem,
          "--degree", "0.2", "--seed", "1"])
    istem = str(tmp_path / "m")
    assert main(["impute", "--method", "mice", "--input", f"{stem}.holed.csv",
                 "--out", istem, "--copies", "2", "--sweeps", "3",
                 "--seed", "4"]) == 0
    assert os.path.exists(f"{istem}.imputed.mice.0.csv")
    assert os.path.exists(f"{istem}.imputed.mice.1.csv")
    assert not os.path.exists(f"{istem}.imputed.mice.2.csv")


def test_evaluate_missing_input_is_validation_error(tmp_path, capsys):
    code = main(["evaluate", "--truth", str(tmp_path / "nope.csv"),
                 "--imputed", str(tmp_path / "nope.csv"),
                 "--mask", str(tmp_path / "nope.csv")])
    assert code == 1
    assert capsys.readouterr().err.startswith("error:")


# ---------------------------------------------------------------------------
# genfit / synth
# ---------------------------------------------------------------------------

def test_genfit_then_synth(tmp_path, capsys):
    out = tmp_path / "stage"
    cfg = write_cfg(tmp_path, out)
    assert main(["genfit", "--config", str(cfg)]) == 0
    assert "selected k=2" in capsys.readouterr().out
    for name in ("gmm_search.csv", "generator.npz", "scaler.npz",
                 "clean_scaled.csv", "meta.json"):
        assert (out / name).exists(), name
    meta = json.loads((out / "meta.json").read_text(encoding="utf-8"))
    assert meta["selected_k"] == 2
    assert meta["selected_kind"] == "spherical"
    assert len(meta["names"]) == 4

    assert main(["synth", "--config", str(cfg)]) == 0
    synth = (out / "synthetic.csv").read_text(encoding="utf-8").splitlines()
    assert len(synth) == 1 + 150
    assert synth[0] == "c0,c1,c2,c3,label".replace("c0,c1,c2,c3",
                                                   ",".join(meta["names"]))
    reserved = (out / "reserved.csv").read_text(encoding="utf-8").splitlines()
    assert len(reserved) == 1 + 40
    history = (out / "target_history.csv").read_text(encoding="utf-8").splitlines()
    assert history[0] == "epoch,train_loss,valid_loss,train_acc,valid_acc"
    counts = (out / "generator_components.csv").read_text(encoding="utf-8").splitlines()
    assert counts[0] == "component,count"
    assert sum(int(r.split(",")[1]) for r in counts[1:]) == 150


def test_synth_without_genfit_artifacts(tmp_path, capsys):
    cfg = write_cfg(tmp_path, tmp_path / "empty-stage")
    assert main(["synth", "--config", str(cfg)]) == 1
    assert "run genfit first" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# run / report
# ---------------------------------------------------------------------------

def test_run_and_report_reemission(tmp_path, capsys):
    out = tmp_path / "full"
    cfg = write_cfg(tmp_path, out)
    assert main(["run", "--config", str(cfg)]) == 0
    stdout = capsys.readouterr().out
    assert "0 failures" in stdout
    for name in ("accuracy.csv", "loss.csv", "clustering.csv", "direct.csv",
                 "manifest.json", "report.json"):
        assert (out / name).exists(), name

    other = tmp_path / "reemitted"
    assert main(["report", str(out), "--out", str(other)]) == 0
    assert (other / "accuracy.csv").read_bytes() == (out / "accuracy.csv").read_bytes()
    assert (other / "clustering.csv").read_bytes() == (out / "clustering.csv").read_bytes()


def test_report_requires_report_json(tmp_path, capsys):
    os.makedirs(tmp_path / "bare")
    assert main(["report", str(tmp_path / "bare")]) == 1
    assert "no report.json" in capsys.readouterr().err


def test_bad_config_exits_one(tmp_path, capsys):
    cfg = write_cfg(tmp_path, tmp_path / "o", extra="bogus.key = 1")
    assert main(["run", "--config", str(cfg)]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error:") and "unknown key" in err


def test_cell_failures_exit_two(tmp_path, capsys):
    # More clusters than synthetic rows: every clustering cell fails, the
    # classification grid still completes, and the run reports partial results.
    out = tmp_path / "partial"
    cfg = write_cfg(tmp_path, out, extra="clusters = 500")
    assert main(["run", "--config", str(cfg)]) == 2
    captured = capsys.readouterr()
    assert "FAILED" in captured.err and "[cluster]" in captured.err
    assert (out / "accuracy.csv").exists()
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert report["failures"]
    assert all(f["stage"] == "cluster" for f in report["failures"])
    assert report["cells"]
