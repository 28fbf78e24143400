import numpy as np
import pytest

from faultcast.errors import DataFormatError
from faultcast.learners import (DecisionTreeClassifier, ExtraTreesRegressor,
                                GradientBoostedClassifier, LogisticRegression,
                                RandomForestClassifier, RidgeRegression,
                                class_weight_vector)


def exhaustive_tree_accuracy(X, y):
    """Best training accuracy any axis-aligned binary tree can reach.

    Recursive enumeration of every split with memoization; tractable for
    the <= 8-point fixtures it is used on.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    cache = {}

    def best(rows: frozenset) -> int:
        if rows in cache:
            return cache[rows]
        idx = sorted(rows)
        labels = y[idx]
        score = max((labels == 0).sum(), (labels == 1).sum())
        if labels.min() != labels.max():
            for j in range(X.shape[1]):
                col = X[idx, j]
                for thr in np.unique(col)[:-1]:
                    left = frozenset(i for i in idx if X[i, j] <= thr)
                    right = rows - left
                    if left and right:
                        score = max(score, best(left) + best(right))
        cache[rows] = score
        return score

    return best(frozenset(range(len(y)))) / len(y)


class TestDecisionTree:
    def test_pure_labels_single_leaf(self):
        t = DecisionTreeClassifier().fit(np.zeros((5, 2)), np.ones(5))
        assert t.nodes_.node_count == 1
        assert t.predict(np.zeros((3, 2))).tolist() == [1, 1, 1]

    def test_1d_threshold_split(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([0, 0, 1, 1])
        t = DecisionTreeClassifier().fit(X, y)
        assert 1.0 < t.nodes_.threshold[0] < 2.0
        assert (t.predict(X) == y).all()

    def test_xor_needs_depth_two(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = np.array([0, 1, 1, 0])
        t = DecisionTreeClassifier().fit(X, y)
        assert t.depth_ == 2
        assert (t.predict(X) == y).all()

    def test_matches_exhaustive_oracle_on_tiny_datasets(self):
        rng = np.random.default_rng(210)
        for trial in range(60):
            n = int(rng.integers(2, 9))
            p = int(rng.integers(1, 4))
            X = rng.integers(0, 3, size=(n, p)).astype(float)
            y = rng.integers(0, 2, size=n)
            if y.min() == y.max():
                continue
            tree = DecisionTreeClassifier().fit(X, y)
            got = (tree.predict(X) == y).mean()
            want = exhaustive_tree_accuracy(X, y)
            assert got == pytest.approx(want), f"trial {trial}"

    def test_max_depth_respected(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(100, 3))
        y = rng.integers(0, 2, 100)
        t = DecisionTreeClassifier(max_depth=2).fit(X, y)
        assert t.depth_ <= 2

    def test_sample_weights_shift_the_split(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([0, 1, 1, 1])
        heavy_zero = DecisionTreeClassifier().fit(X, y, sample_weight=[100, 1, 1, 1])
        assert (heavy_zero.predict(np.array([[0.0]])) == 0).all()

    def test_deterministic_across_runs(self):
        rng = np.random.default_rng(17)
        X = rng.normal(size=(60, 4))
        y = rng.integers(0, 2, 60)
        a = DecisionTreeClassifier().fit(X, y)
        b = DecisionTreeClassifier().fit(X, y)
        assert a.nodes_.threshold.tolist() == b.nodes_.threshold.tolist()
        assert a.nodes_.feature.tolist() == b.nodes_.feature.tolist()

    def test_gini_endpoints_via_recorded_decrease(self):
        # root is 50/50 (gini 0.5); the split yields two pure children
        # (gini 0), so the recorded root-weighted decrease is exactly 0.5
        X = np.array([[0.0], [0.0], [1.0], [1.0]])
        y = np.array([0, 0, 1, 1])
        t = DecisionTreeClassifier().fit(X, y)
        assert t.impurity_decreases_[0] == pytest.approx(0.5, abs=1e-12)

    def test_gini_tie_breaks_toward_lowest_feature(self):
        # both features separate perfectly; feature 0 must win
        X = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
        y = np.array([0, 0, 1, 1])
        t = DecisionTreeClassifier().fit(X, y)
        assert t.nodes_.feature[0] == 0

    def test_empty_input_rejected(self):
        with pytest.raises(DataFormatError):
            DecisionTreeClassifier().fit(np.empty((0, 2)), np.empty(0))

    def test_serialization_round_trip(self):
        rng = np.random.default_rng(23)
        X = rng.normal(size=(80, 3))
        y = rng.integers(0, 2, 80)
        t = DecisionTreeClassifier().fit(X, y)
        back = DecisionTreeClassifier.from_dict(t.to_dict())
        Xp = rng.normal(size=(40, 3))
        assert (t.predict(Xp) == back.predict(Xp)).all()


class TestExtraTrees:
    def test_constant_target(self):
        X = np.random.default_rng(0).normal(size=(20, 2))
        m = ExtraTreesRegressor(n_trees=5, seed=1).fit(X, np.full(20, 3.5))
        assert np.allclose(m.predict(X), 3.5)

    def test_fits_identity_function(self):
        x = np.linspace(0, 1, 100)[:, None]
        y = x.ravel()
        m = ExtraTreesRegressor(n_trees=50, seed=2).fit(x, y)
        mse = float(((m.predict(x) - y) ** 2).mean())
        assert mse < y.var() / 10

    def test_more_trees_do_not_hurt(self):
        rng = np.random.default_rng(4)
        wins = 0
        for seed in range(10):
            x = rng.uniform(0, 1, size=(80, 1))
            noise = rng.normal(0, 0.2, 80)
            y = 2 * x.ravel() + noise
            x_test = rng.uniform(0, 1, size=(80, 1))
            y_test = 2 * x_test.ravel()
            one = ExtraTreesRegressor(n_trees=1, seed=seed).fit(x, y)
            many = ExtraTreesRegressor(n_trees=50, seed=seed).fit(x, y)
            mse_one = ((one.predict(x_test) - y_test) ** 2).mean()
            mse_many = ((many.predict(x_test) - y_test) ** 2).mean()
            wins += mse_many <= mse_one
        assert wins >= 8

    def test_deterministic_for_seed(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(50, 3))
        y = rng.normal(size=50)
        a = ExtraTreesRegressor(n_trees=7, seed=9).fit(X, y).predict(X)
        b = ExtraTreesRegressor(n_trees=7, seed=9).fit(X, y).predict(X)
        assert np.array_equal(a, b)

    def test_needs_two_rows(self):
        with pytest.raises(DataFormatError):
            ExtraTreesRegressor().fit(np.zeros((1, 2)), np.zeros(1))


class TestRidge:
    def test_exact_linear_fit(self):
        m = RidgeRegression(alpha=0.0).fit(np.array([[1.0], [2.0], [3.0]]),
                                           np.array([2.0, 4.0, 6.0]))
        assert m.weights_[0] == pytest.approx(2.0)
        assert m.intercept_ == pytest.approx(0.0)

    def test_huge_alpha_shrinks_to_mean(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(50, 3))
        y = rng.normal(size=50) + 5.0
        m = RidgeRegression(alpha=1e9).fit(X, y)
        assert np.all(np.abs(m.weights_) < 1e-6)
        assert np.allclose(m.predict(X), y.mean(), atol=1e-4)

    def test_normal_equation_arithmetic(self):
        # centered x = [-0.5, 0.5]: w = 0.5 / (0.5 + 1)
        m = RidgeRegression(alpha=1.0).fit(np.array([[1.0], [2.0]]),
                                           np.array([1.0, 2.0]))
        assert m.weights_[0] == pytest.approx(1 / 3, abs=1e-12)

    def test_alpha_zero_rank_deficient_rejected(self):
        X = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])  # collinear
        with pytest.raises(DataFormatError, match="rank"):
            RidgeRegression(alpha=0.0).fit(X, np.array([1.0, 2.0, 3.0]))

    def test_solution_zeroes_objective_gradient(self):
        rng = np.random.default_rng(8)
        for alpha in (0.1, 1.0, 10.0):
            X = rng.normal(size=(30, 4))
            y = rng.normal(size=30)
            m = RidgeRegression(alpha=alpha).fit(X, y)
            Xc = X - X.mean(axis=0)
            yc = y - y.mean()
            grad = Xc.T @ (Xc @ m.weights_ - yc) + alpha * m.weights_
            assert np.all(np.abs(grad) < 1e-8)

    def test_gradient_check_by_finite_differences(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(20, 3))
        y = rng.normal(size=20)
        alpha = 0.7
        m = RidgeRegression(alpha=alpha).fit(X, y)
        Xc = X - X.mean(axis=0)
        yc = y - y.mean()

        def objective(w):
            r = yc - Xc @ w
            return 0.5 * float(r @ r) + 0.5 * alpha * float(w @ w)

        eps = 1e-6
        for k in range(3):
            e = np.zeros(3)
            e[k] = eps
            fd = (objective(m.weights_ + e) - objective(m.weights_ - e)) / (2 * eps)
            assert abs(fd) < 1e-8 * max(1.0, abs(objective(m.weights_)))


class TestGradientBoosting:
    def test_constant_feature_coin_flip_probability(self):
        rng = np.random.default_rng(10)
        X = np.ones((200, 1))
        y = np.array([0, 1] * 100)
        m = GradientBoostedClassifier(n_estimators=10).fit(X, y)
        proba = m.predict_proba(X)[:, 1]
        assert np.allclose(proba, 0.5, atol=1e-9)

    def test_separable_reaches_perfect_training_accuracy(self):
        rng = np.random.default_rng(11)
        X = np.sort(rng.normal(size=(100, 1)), axis=0)
        y = (X.ravel() > X[49, 0]).astype(int)
        m = GradientBoostedClassifier(n_estimators=50).fit(X, y)
        assert (m.predict(X) == y).all()

    def test_class_weights_shift_base_score(self):
        y = np.zeros(10000, dtype=int)
        y[:167] = 1
        X = np.zeros((10000, 1))
        unweighted = GradientBoostedClassifier(n_estimators=1).fit(X, y)
        assert unweighted.base_score_ == pytest.approx(np.log(167 / 9833))
        weighted = GradientBoostedClassifier(n_estimators=1,
                                             class_weights=(1.0, 59.0)).fit(X, y)
        prior = 167 * 59 / (9833 + 167 * 59)
        assert weighted.base_score_ == pytest.approx(np.log(prior / (1 - prior)))
        assert abs(weighted.base_score_) < 0.01

    def test_balanced_weights_normalized_to_mean_one(self):
        y = np.array([0] * 59 + [1])
        w = class_weight_vector(y, "balanced")
        assert w.mean() == pytest.approx(1.0)
        assert w[-1] / w[0] == pytest.approx(59.0)

    def test_training_loss_non_increasing(self):
        rng = np.random.default_rng(12)
        for seed in range(5):
            X = rng.normal(size=(150, 4))
            y = (X[:, 0] + 0.5 * rng.normal(size=150) > 0).astype(int)
            m = GradientBoostedClassifier(n_estimators=30, seed=seed).fit(X, y)
            losses = np.array(m.train_loss_)
            assert np.all(np.diff(losses) <= 1e-12)

    def test_probabilities_in_open_interval(self):
        rng = np.random.default_rng(13)
        X = rng.normal(size=(80, 2))
        y = (X[:, 0] > 0).astype(int)
        m = GradientBoostedClassifier(n_estimators=60).fit(X, y)
        proba = m.predict_proba(X)
        assert np.all(proba > 0.0) and np.all(proba < 1.0)
        assert (m.predict(X) == (proba[:, 1] >= 0.5)).all()

    def test_single_class_rejected(self):
        with pytest.raises(DataFormatError, match="single class"):
            GradientBoostedClassifier().fit(np.zeros((5, 1)), np.zeros(5))

    def test_round_by_round_matches_manual_newton_tree(self):
        # one round, depth-1 tree, hand-computed leaf weights
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([0.0, 0.0, 1.0, 1.0])
        lam = 1.0
        m = GradientBoostedClassifier(n_estimators=1, max_depth=1,
                                      reg_lambda=lam, learning_rate=0.3).fit(X, y)
        # base score = logit(0.5) = 0; p = 0.5 for every row
        g = np.full(4, 0.5) - y
        h = np.full(4, 0.25)
        left, right = [0, 1], [2, 3]
        w_left = -g[left].sum() / (h[left].sum() + lam)
        w_right = -g[right].sum() / (h[right].sum() + lam)
        tree = m.trees_[0]
        leaf_of = tree.apply(X)
        assert tree.leaf_value[leaf_of[0]] == pytest.approx(w_left)
        assert tree.leaf_value[leaf_of[3]] == pytest.approx(w_right)


class TestRandomForest:
    def test_single_row_single_tree(self):
        m = RandomForestClassifier(n_trees=1, seed=0).fit(
            np.array([[1.0]]), np.array([1]))
        assert m.predict(np.array([[1.0]])).tolist() == [1]

    def test_unanimous_vote(self):
        X = np.array([[0.0], [1.0]] * 10)
        y = np.array([0, 1] * 10)
        m = RandomForestClassifier(n_trees=9, seed=1).fit(X, y)
        assert (m.predict(X) == y).all()

    def test_forest_beats_single_tree_on_noise(self):
        wins = 0
        for seed in range(10):
            rng = np.random.default_rng(seed)
            X = rng.normal(size=(300, 6))
            logits = X[:, 0] + X[:, 1] + rng.normal(0, 1.5, 300)
            y = (logits > 0).astype(int)
            X_test = rng.normal(size=(300, 6))
            y_test = (X_test[:, 0] + X_test[:, 1] > 0).astype(int)
            tree = DecisionTreeClassifier().fit(X, y)
            forest = RandomForestClassifier(n_trees=30, seed=seed).fit(X, y)
            acc_tree = (tree.predict(X_test) == y_test).mean()
            acc_forest = (forest.predict(X_test) == y_test).mean()
            wins += acc_forest >= acc_tree
        assert wins >= 8

    def test_tie_goes_to_class_zero(self):
        X = np.array([[0.0], [1.0]] * 5
                     )
        y = np.array([0, 1] * 5)
        m = RandomForestClassifier(n_trees=2, seed=3).fit(X, y)
        votes = sum(t.predict(np.array([[0.5]]))[0] for t in m.trees_)
        if votes * 2 == m.n_trees:   # exercised only on an actual tie
            assert m.predict(np.array([[0.5]]))[0] == 0


class TestLogistic:
    def test_separable_training_accuracy(self):
        X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
        y = np.array([0, 0, 1, 1])
        m = LogisticRegression(C=1000.0).fit(X, y)
        assert (m.predict(X) == y).all()

    def test_strong_regularization_gives_majority_prior(self):
        rng = np.random.default_rng(14)
        X = rng.normal(size=(200, 2))
        y = (rng.random(200) < 0.8).astype(int)
        m = LogisticRegression(C=1e-9).fit(X, y)
        assert np.all(np.abs(m.weights_) < 1e-4)
        assert m.predict_proba(X)[:, 1] == pytest.approx(y.mean(), abs=1e-3)

    def test_symmetric_boundary_at_midpoint(self):
        X = np.array([[-3.0], [-2.0], [-1.0], [1.0], [2.0], [3.0]])
        y = np.array([0, 0, 0, 1, 1, 1])
        m = LogisticRegression(C=1.0).fit(X, y)
        boundary = -m.intercept_ / m.weights_[0]
        assert abs(boundary) < 1e-6

    def test_non_convergence_warns_not_fatal(self):
        rng = np.random.default_rng(15)
        X = rng.normal(size=(50, 2))
        y = (X[:, 0] > 0).astype(int)
        with pytest.warns(RuntimeWarning, match="did not reach"):
            m = LogisticRegression(C=1e6, max_iter=1).fit(X, y)
        assert m.converged_ is False
