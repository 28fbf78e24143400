import numpy as np
import pytest

from faultcast.data_model import LabeledDataset, Table
from faultcast.errors import ConfigError, DataFormatError
from faultcast.feature_selection import (EstimatorSpec, feature_importances,
                                         rfe, rfecv, stratified_kfold)
from faultcast.learners import DecisionTreeClassifier


def dataset(values, y, names=None):
    values = np.asarray(values, dtype=float)
    names = names or [f"f{j}" for j in range(values.shape[1])]
    t = Table(names, np.arange(len(values)), values,
              np.zeros_like(values, dtype=bool))
    return LabeledDataset(t, np.asarray(y, dtype=int))


def informative_plus_noise(seed, n=240, informative=3, noise=7, strength=2.0):
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < 0.5).astype(int)
    signal = rng.normal(size=(n, informative)) + strength * y[:, None]
    junk = rng.normal(size=(n, noise))
    names = ([f"real{j}" for j in range(informative)]
             + [f"junk{j}" for j in range(noise)])
    return dataset(np.hstack([signal, junk]), y, names), names[:informative]


class TestFeatureImportances:
    def test_single_feature_model(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([0, 0, 1, 1])
        model = DecisionTreeClassifier().fit(X, y)
        imps = feature_importances(model, ["only"])
        assert imps == {"only": 1.0}

    def test_informative_beats_noise(self):
        rng = np.random.default_rng(1)
        y = rng.integers(0, 2, 200)
        X = np.column_stack([y + 0.01 * rng.normal(size=200),
                             rng.normal(size=200)])
        model = DecisionTreeClassifier(max_depth=4).fit(X, y)
        imps = feature_importances(model, ["signal", "noise"])
        assert imps["signal"] > imps["noise"]
        assert sum(imps.values()) == pytest.approx(1.0)

    def test_pure_labels_all_zero_with_warning(self):
        model = DecisionTreeClassifier().fit(np.zeros((4, 2)), np.ones(4))
        with pytest.warns(RuntimeWarning, match="no splits"):
            imps = feature_importances(model, ["a", "b"])
        assert imps == {"a": 0.0, "b": 0.0}

    def test_name_count_mismatch(self):
        model = DecisionTreeClassifier().fit(np.zeros((4, 2)), np.ones(4))
        with pytest.raises(DataFormatError):
            feature_importances(model, ["a"])


class TestRfe:
    def test_keep_all_is_identity(self):
        d, _ = informative_plus_noise(seed=2, informative=2, noise=2)
        result = rfe(d, keep=4)
        assert set(result.selected) == set(d.features.column_names)
        assert all(rank == 1 for rank in result.ranking.values())

    def test_informative_survives(self):
        d, real = informative_plus_noise(seed=3, informative=1, noise=1,
                                         strength=3.0)
        result = rfe(d, keep=1)
        assert result.selected == real

    def test_ranking_forms_tied_groups(self):
        d, _ = informative_plus_noise(seed=4, informative=2, noise=4)
        result = rfe(d, keep=2, step=2)
        ranks = sorted(result.ranking.values())
        assert ranks == [1, 1, 2, 2, 3, 3]

    def test_invalid_keep(self):
        d, _ = informative_plus_noise(seed=5)
        with pytest.raises(ConfigError):
            rfe(d, keep=0)
        with pytest.raises(ConfigError):
            rfe(d, keep=99)

    def test_prefix_stability_when_last_ranked_removed(self):
        d, _ = informative_plus_noise(seed=6, informative=2, noise=3)
        spec = EstimatorSpec(kind="gbt", n_estimators=30, max_depth=3)
        full = rfe(d, spec, keep=1)
        worst = max(full.ranking, key=full.ranking.get)
        reduced = d.select_columns([c for c in d.features.column_names
                                    if c != worst])
        rerun = rfe(reduced, spec, keep=1)
        assert rerun.selected == full.selected


class TestStratifiedKfold:
    def test_each_class_spread_over_folds(self):
        y = np.array([0] * 50 + [1] * 10)
        folds = stratified_kfold(y, 5, seed=0)
        for test_idx in folds:
            assert (y[test_idx] == 1).sum() == 2
            assert (y[test_idx] == 0).sum() == 10

    def test_class_too_small(self):
        y = np.array([0] * 50 + [1] * 3)
        with pytest.raises(DataFormatError, match="class 1"):
            stratified_kfold(y, 5, seed=0)

    def test_partition(self):
        y = np.random.default_rng(0).integers(0, 2, 40)
        folds = stratified_kfold(y, 4, seed=1)
        joined = sorted(np.concatenate(folds).tolist())
        assert joined == list(range(40))


class TestRfecv:
    def test_single_feature_forced(self):
        d, _ = informative_plus_noise(seed=7, informative=1, noise=0)
        result = rfecv(d, EstimatorSpec(kind="gbt", n_estimators=20), folds=3)
        assert result.chosen_k == 1
        assert result.cv_scores.keys() == {1}

    def test_recovers_ground_truth_features(self):
        spec = EstimatorSpec(kind="gbt", n_estimators=40, max_depth=3)
        hits = 0
        for seed in range(10):
            d, real = informative_plus_noise(seed=100 + seed)
            result = rfecv(d, spec, folds=4, seed=seed)
            hits += set(real) <= set(result.selected)
        assert hits >= 9

    def test_deterministic(self):
        d, _ = informative_plus_noise(seed=8)
        spec = EstimatorSpec(kind="gbt", n_estimators=20, max_depth=2)
        a = rfecv(d, spec, folds=3, seed=5)
        b = rfecv(d, spec, folds=3, seed=5)
        assert a.selected == b.selected
        assert a.cv_scores == b.cv_scores

    def test_ties_prefer_smaller_k(self):
        d, _ = informative_plus_noise(seed=9, informative=1, noise=1,
                                      strength=5.0)
        result = rfecv(d, EstimatorSpec(kind="gbt", n_estimators=20), folds=3)
        top = max(result.cv_scores.values())
        smallest_at_top = min(k for k, v in result.cv_scores.items() if v == top)
        assert result.chosen_k == smallest_at_top

    def test_selected_size_matches_chosen_k(self):
        d, _ = informative_plus_noise(seed=10, informative=2, noise=4)
        result = rfecv(d, EstimatorSpec(kind="gbt", n_estimators=20), folds=3)
        assert len(result.selected) == result.chosen_k
        assert set(result.selected) == {c for c, r in result.ranking.items()
                                        if r == 1}
