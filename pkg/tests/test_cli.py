import json
import os

import pytest

from faultcast.cli import main


def run_cli(*argv) -> int:
    return main([str(a) for a in argv])


@pytest.fixture()
def synth_dir(tmp_path):
    out = tmp_path / "synth"
    rc = run_cli("synth", "--rows", 600, "--measures", 8, "--hist-sensors", 1,
                 "--bins", 4, "--positive-fraction", 0.1, "--signal", 2.0,
                 "--informative", 4, "--seed", 7, "--out", out)
    assert rc == 0
    return out


@pytest.fixture()
def small_config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({
        "seed": 3,
        "imputer": {"max_iter": 1,
                    "d2": {"kind": "extra_trees", "n_trees": 3,
                           "max_depth": 5, "min_samples_split": 20}},
        "model": {"type": "stacked", "n_base": 15,
                  "meta": {"kind": "gbt", "n_estimators": 10}},
    }))
    return path


class TestSynthProfile:
    def test_synth_outputs(self, synth_dir):
        for name in ("synth_data.csv", "synth_truth.csv",
                     "synth_manifest.json"):
            assert (synth_dir / name).exists()
        manifest = json.loads((synth_dir / "synth_manifest.json").read_text())
        assert manifest["seed"] == 7

    def test_profile(self, synth_dir, capsys):
        rc = run_cli("profile", synth_dir / "synth_data.csv",
                     "--out", synth_dir)
        assert rc == 0
        profiles = json.loads((synth_dir / "profiles.json").read_text())
        # the id column is consumed as the row index, not profiled
        names = {p["name"] for p in profiles}
        assert "id" not in names
        assert "sensor1_measure" in names


class TestTrainEvaluatePredict:
    def test_full_chain(self, synth_dir, small_config, capsys):
        data = synth_dir / "synth_data.csv"
        rc = run_cli("train", data, "--config", small_config,
                     "--out", synth_dir)
        assert rc == 0
        report = json.loads((synth_dir / "train_report.json").read_text())
        assert report["schema_version"] == 1
        assert "macro_f1" in report["metrics"]
        assert report["model"].startswith("stacked: 15xtree")

        rc = run_cli("evaluate", synth_dir / "model.bundle.gz", data,
                     "--config", small_config, "--out", synth_dir)
        assert rc == 0
        eval_report = json.loads((synth_dir / "eval_report.json").read_text())
        assert eval_report["metrics"]["macro_f1"] > 0.8
        for figure in ("precision_matrix.png", "recall_matrix.png",
                       "confusion_matrix.csv"):
            assert (synth_dir / figure).exists()

        out = capsys.readouterr().out
        assert "macro F1" in out

    def test_predict_single_row(self, synth_dir, small_config, tmp_path):
        data = synth_dir / "synth_data.csv"
        assert run_cli("train", data, "--config", small_config,
                       "--out", synth_dir) == 0
        lines = (synth_dir / "synth_data.csv").read_text().splitlines()
        one_row = tmp_path / "one.csv"
        one_row.write_text("\n".join(lines[:2]) + "\n")
        rc = run_cli("predict", synth_dir / "model.bundle.gz", one_row,
                     "--config", small_config, "--out", tmp_path)
        assert rc == 0
        body = (tmp_path / "predictions.csv").read_text().splitlines()
        assert body[0] == "id,prediction"
        assert len(body) == 2

    def test_single_model_types(self, synth_dir, tmp_path):
        data = synth_dir / "synth_data.csv"
        for mtype, params in (("gbt", {"n_estimators": 10}),
                              ("tree", {"max_depth": 4}),
                              ("logistic", {"C": 1.0})):
            cfg = tmp_path / f"{mtype}.json"
            cfg.write_text(json.dumps({"model": {"type": mtype, **params},
                                       "seed": 1}))
            out = tmp_path / mtype
            assert run_cli("train", data, "--config", cfg, "--out", out) == 0
            report = json.loads((out / "train_report.json").read_text())
            assert report["metrics"]["macro_f1"] > 0.5


class TestPreprocessChain:
    def test_preprocess_then_train_then_evaluate(self, tmp_path, small_config):
        out = tmp_path / "o"
        rc = run_cli("synth", "--rows", 500, "--measures", 6,
                     "--hist-sensors", 1, "--bins", 3,
                     "--positive-fraction", 0.1, "--signal", 2.0,
                     "--mcar-rate", 0.1, "--seed", 5, "--out", out)
        assert rc == 0
        data = out / "synth_data.csv"
        assert run_cli("preprocess", data, "--config", small_config,
                       "--out", out) == 0
        assert (out / "preprocessor.bundle.gz").exists()
        assert run_cli("train", out / "train_preprocessed.csv",
                       "--config", small_config, "--out", out) == 0
        assert run_cli("evaluate", out / "model.bundle.gz", data,
                       "--preprocessor", out / "preprocessor.bundle.gz",
                       "--config", small_config, "--out", out) == 0
        report = json.loads((out / "eval_report.json").read_text())
        assert report["imputation_bands"] is not None

    def test_train_on_incomplete_data_fails_cleanly(self, tmp_path,
                                                    small_config, capsys):
        out = tmp_path / "o"
        rc = run_cli("synth", "--rows", 200, "--measures", 4,
                     "--hist-sensors", 0, "--positive-fraction", 0.2,
                     "--mcar-rate", 0.2, "--seed", 6, "--out", out)
        assert rc == 0
        rc = run_cli("train", out / "synth_data.csv",
                     "--config", small_config, "--out", out / "t")
        assert rc == 2
        err = capsys.readouterr().err
        assert err.startswith("faultcast: error:")
        assert "preprocess" in err
        # no partial outputs left behind
        assert not (out / "t" / "model.bundle.gz").exists()
        assert not (out / "t" / "train_report.json").exists()


class TestSelect:
    def test_rfe_mode_writes_selection(self, tmp_path):
        out = tmp_path / "o"
        rc = run_cli("synth", "--rows", 300, "--measures", 6,
                     "--hist-sensors", 0, "--positive-fraction", 0.3,
                     "--signal", 2.5, "--informative", 2, "--seed", 8,
                     "--out", out, "--marginal", "gaussian")
        assert rc == 0
        cfg = tmp_path / "sel.json"
        cfg.write_text(json.dumps({
            "selection": {"estimator": {"kind": "gbt", "n_estimators": 20,
                                        "max_depth": 3},
                          "keep": 2},
            "seed": 2}))
        rc = run_cli("select", out / "synth_data.csv", "--mode", "rfe",
                     "--config", cfg, "--out", out)
        assert rc == 0
        sel = json.loads((out / "selection.json").read_text())
        assert sel["mode"] == "rfe"
        assert len(sel["selected"]) == 2
        assert set(sel["selected"]) == {"sensor1_measure", "sensor2_measure"}


class TestCompare:
    def test_eight_report_table(self, tmp_path, capsys):
        reports = []
        for k in range(8):
            rep = {
                "schema_version": 1, "run_id": f"r{k}", "model": f"model-{k}",
                "seed": k, "config": {}, "timing_seconds": 1.0,
                "metrics": {
                    "confusion_matrix": [[90, 5], [5, 90 + k]],
                    "precision": [0.9, 0.9], "recall": [0.9, 0.9],
                    "f1": [0.9, 0.9], "macro_f1": 0.80 + 0.01 * k,
                    "misclassification_rate": 0.05, "support": [95, 95 + k],
                },
                "selected_features": None, "imputation_bands": None,
            }
            path = tmp_path / f"rep{k}.json"
            path.write_text(json.dumps(rep))
            reports.append(path)
        rc = run_cli("compare", *reports, "--out", tmp_path)
        assert rc == 0
        rows = json.loads((tmp_path / "compare.json").read_text())
        assert len(rows) == 8
        assert rows[0]["model"] == "model-7"     # best first
        csv_lines = (tmp_path / "compare.csv").read_text().splitlines()
        assert len(csv_lines) == 9               # header + 8 rows
        assert (tmp_path / "compare.png").stat().st_size > 0

    def test_invalid_report_rejected(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"schema_version": 1}))
        rc = run_cli("compare", bad, "--out", tmp_path)
        assert rc == 2
        assert "faultcast: error:" in capsys.readouterr().err
        assert not (tmp_path / "compare.csv").exists()


class TestDeterminism:
    def test_rerun_yields_identical_predictions_and_reports(self, synth_dir,
                                                            small_config,
                                                            tmp_path):
        data = synth_dir / "synth_data.csv"
        outs = []
        for run in ("a", "b"):
            out = tmp_path / run
            assert run_cli("train", data, "--config", small_config,
                           "--out", out) == 0
            assert run_cli("predict", out / "model.bundle.gz", data,
                           "--config", small_config, "--out", out) == 0
            outs.append(out)
        pred_a = (outs[0] / "predictions.csv").read_text()
        pred_b = (outs[1] / "predictions.csv").read_text()
        assert pred_a == pred_b
        rep_a = json.loads((outs[0] / "train_report.json").read_text())
        rep_b = json.loads((outs[1] / "train_report.json").read_text())
        assert rep_a["run_id"] == rep_b["run_id"]
        assert rep_a["metrics"] == rep_b["metrics"]
