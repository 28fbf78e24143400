import json
import os
import shutil
import subprocess
import sys

import numpy as np
import pandas as pd
import pytest

from baselines.cli import main
from baselines.reporting import validate_report
from baselines.runner import (BaselineSpec, HarnessError, LibraryUnavailable,
                              run_baseline)

GOLDEN = os.path.join(os.path.dirname(__file__), "data",
                      "golden_run_report.json")

AVAILABLE_FAMILIES = ["gradient_boosted", "random_forest", "adaboost"]


def write_split(path, seed, n=300, leak=False, positive=0.3, missing=False):
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < positive).astype(int)
    df = pd.DataFrame({
        "id": np.arange(n),
        "f0": y.astype(float) if leak else rng.normal(size=n),
        "f1": rng.normal(size=n) + 1.5 * y,
        "f2": rng.normal(size=n),
        "f3": rng.normal(size=n),
        "class": y,
    })
    if missing:
        df.loc[3, "f2"] = np.nan
    df.to_csv(path, index=False, na_rep="na")
    return path


@pytest.fixture()
def csv_pair(tmp_path):
    train = write_split(tmp_path / "train.csv", seed=0)
    test = write_split(tmp_path / "test.csv", seed=1)
    return str(train), str(test)


class TestSpec:
    def test_unknown_family(self):
        with pytest.raises(HarnessError, match="family"):
            BaselineSpec(family="svm")

    def test_unknown_keys(self):
        with pytest.raises(HarnessError, match="unknown spec keys"):
            BaselineSpec.from_dict({"family": "adaboost", "depth": 3})


class TestRunBaseline:
    @pytest.mark.parametrize("family", AVAILABLE_FAMILIES)
    def test_leaked_label_gives_perfect_macro_f1(self, tmp_path, family):
        train = write_split(tmp_path / "train.csv", seed=2, leak=True)
        test = write_split(tmp_path / "test.csv", seed=3, leak=True)
        spec = BaselineSpec(family=family, n_estimators=30, seed=0)
        report = run_baseline(train, test, spec)
        assert report["metrics"]["macro_f1"] == 1.0

    def test_report_matches_shared_schema(self, csv_pair):
        report = run_baseline(*csv_pair,
                              BaselineSpec(family="random_forest",
                                           n_estimators=20))
        assert validate_report(report) == []
        golden = json.load(open(GOLDEN))
        assert report.keys() == golden.keys()
        assert set(golden["metrics"].keys()) <= set(report["metrics"].keys())

    def test_library_and_estimators_recorded(self, csv_pair):
        spec = BaselineSpec(family="gradient_boosted", n_estimators=40,
                            weighted=True, seed=5)
        report = run_baseline(*csv_pair, spec)
        assert report["config"]["spec"] == spec.to_dict()
        assert report["config"]["library"] in ("xgboost", "sklearn-histgb")
        assert "(40, weighted)" in report["model"]

    def test_weighted_variants_run(self, csv_pair):
        for family in ("random_forest", "adaboost"):
            spec = BaselineSpec(family=family, n_estimators=15, weighted=True)
            report = run_baseline(*csv_pair, spec)
            assert 0.0 <= report["metrics"]["macro_f1"] <= 1.0

    def test_missing_values_rejected(self, tmp_path):
        train = write_split(tmp_path / "train.csv", seed=4, missing=True)
        test = write_split(tmp_path / "test.csv", seed=5)
        with pytest.raises(HarnessError, match="missing values"):
            run_baseline(train, test, BaselineSpec(family="adaboost"))

    def test_column_mismatch_rejected(self, tmp_path):
        train = write_split(tmp_path / "train.csv", seed=6)
        test = write_split(tmp_path / "test.csv", seed=7)
        df = pd.read_csv(test)
        df.rename(columns={"f3": "other"}).to_csv(test, index=False)
        with pytest.raises(HarnessError, match="disagree"):
            run_baseline(str(train), str(test), BaselineSpec(family="adaboost"))

    def test_catboost_unavailable_raises_library_error(self, csv_pair):
        try:
            import catboost  # noqa: F401
            pytest.skip("catboost installed")
        except ImportError:
            pass
        with pytest.raises(LibraryUnavailable, match="catboost"):
            run_baseline(*csv_pair, BaselineSpec(family="catboost"))

    def test_deterministic_for_seed(self, csv_pair):
        spec = BaselineSpec(family="random_forest", n_estimators=25, seed=9)
        a = run_baseline(*csv_pair, spec)
        b = run_baseline(*csv_pair, spec)
        assert a["run_id"] == b["run_id"]
        assert a["metrics"] == b["metrics"]


class TestCli:
    def test_single_spec_writes_report(self, csv_pair, tmp_path, capsys):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps(
            {"family": "random_forest", "n_estimators": 20, "seed": 1}))
        out = tmp_path / "report.json"
        rc = main(["run", "--data", csv_pair[0], "--split", csv_pair[1],
                   "--spec", str(spec_path), "--out", str(out)])
        assert rc == 0
        report = json.loads(out.read_text())
        assert validate_report(report) == []
        assert "macro F1" in capsys.readouterr().out

    def test_spec_list_continues_past_unavailable_library(self, csv_pair,
                                                          tmp_path, capsys):
        try:
            import catboost  # noqa: F401
            pytest.skip("catboost installed")
        except ImportError:
            pass
        spec_path = tmp_path / "specs.json"
        spec_path.write_text(json.dumps([
            {"family": "catboost", "n_estimators": 10},
            {"family": "adaboost", "n_estimators": 10},
        ]))
        out = tmp_path / "reports"
        rc = main(["run", "--data", csv_pair[0], "--split", csv_pair[1],
                   "--spec", str(spec_path), "--out", str(out)])
        assert rc == 0                      # one model failed, one succeeded
        err = capsys.readouterr().err
        assert "catboost" in err
        written = sorted(os.listdir(out))
        assert written == ["report_1_adaboost.json"]

    def test_all_models_failing_is_nonzero(self, tmp_path, capsys):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps({"family": "adaboost"}))
        rc = main(["run", "--data", str(tmp_path / "nope.csv"),
                   "--split", str(tmp_path / "nope.csv"),
                   "--spec", str(spec_path),
                   "--out", str(tmp_path / "r.json")])
        assert rc == 2


@pytest.mark.skipif(shutil.which("faultcast") is None,
                    reason="primary CLI not installed")
class TestPrimaryInterop:
    def test_report_round_trips_through_compare(self, csv_pair, tmp_path):
        report = run_baseline(*csv_pair,
                              BaselineSpec(family="gradient_boosted",
                                           n_estimators=25, seed=2))
        path = tmp_path / "harness_report.json"
        path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        proc = subprocess.run(
            ["faultcast", "compare", str(path), "--out", str(tmp_path)],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        rows = json.loads((tmp_path / "compare.json").read_text())
        assert len(rows) == 1
        assert rows[0]["model"] == report["model"]
        assert rows[0]["macro_f1"] == report["metrics"]["macro_f1"]
        assert rows[0]["precision_class1"] == report["metrics"]["precision"][1]
        assert rows[0]["recall_class1"] == report["metrics"]["recall"][1]
        assert rows[0]["run_id"] == report["run_id"]


KAGGLE_TRAIN = os.environ.get("FAULTCAST_PREPROCESSED_TRAIN", "")
KAGGLE_TEST = os.environ.get("FAULTCAST_PREPROCESSED_TEST", "")


@pytest.mark.skipif(not (KAGGLE_TRAIN and KAGGLE_TEST),
                    reason="set FAULTCAST_PREPROCESSED_TRAIN/TEST to the "
                           "pipeline-preprocessed Kaggle CSVs")
class TestDatasetGated:
    def test_unweighted_gradient_boosted_700(self):
        spec = BaselineSpec(family="gradient_boosted", n_estimators=700,
                            weighted=False, seed=0)
        report = run_baseline(KAGGLE_TRAIN, KAGGLE_TEST, spec)
        assert abs(report["metrics"]["macro_f1"] - 0.89399) <= 0.02
