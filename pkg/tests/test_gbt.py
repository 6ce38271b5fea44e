import numpy as np
import pytest
from sklearn.base import clone

from plgg_response.exceptions import DegenerateLabelsError, ShapeError
from plgg_response.trees import GbtParams, GradientBoostedTreesClassifier, fit_gbt, predict_prob
from plgg_response.trees.gbt import sigmoid

X2 = np.array([[0.0], [1.0]])
Y2 = np.array([0, 1])


def two_sample(lam):
    return fit_gbt(X2, Y2, GbtParams(max_depth=1, learning_rate=1.0, reg_lambda=lam, reg_alpha=0.0,
                                     gamma=0.0, n_rounds=1, min_child_weight=0.0))


def leaf_values(model):
    feature, _, _, _, value, *_ = next(model.iter_trees())
    return value[feature < 0]


def test_two_sample_lambda0():
    m = two_sample(0.0)
    np.testing.assert_allclose(leaf_values(m), [-2.0, 2.0], atol=1e-12)
    np.testing.assert_allclose(predict_prob(m, X2), [sigmoid(-2.0), sigmoid(2.0)], atol=1e-12)
    assert predict_prob(m, X2)[0] == pytest.approx(0.1192, abs=1e-4)


def test_two_sample_lambda1_closed_form():
    # g = -/+0.5, h = 0.25 per leaf: w = -G / (H + lambda) = 0.5 / 1.25
    np.testing.assert_allclose(leaf_values(two_sample(1.0)), [-0.4, 0.4], atol=1e-12)


def test_alpha_soft_threshold_and_gamma():
    m = fit_gbt(X2, Y2, GbtParams(max_depth=1, learning_rate=1.0, reg_lambda=0.0, reg_alpha=0.25,
                                  n_rounds=1, min_child_weight=0.0))
    np.testing.assert_allclose(leaf_values(m), [-1.0, 1.0], atol=1e-12)  # (0.5 - 0.25) / 0.25
    # gain at lambda=0 is 0.5 * (1 + 1 - 0) = 1; gamma above it blocks the split
    m = fit_gbt(X2, Y2, GbtParams(max_depth=1, learning_rate=1.0, reg_lambda=0.0, gamma=1.5,
                                  n_rounds=1, min_child_weight=0.0))
    assert next(m.iter_trees())[0].tolist() == [-1]


def test_min_child_weight_blocks_split():
    m = fit_gbt(X2, Y2, GbtParams(max_depth=1, learning_rate=1.0, min_child_weight=0.3, n_rounds=1))
    assert len(next(m.iter_trees())[0]) == 1


@pytest.mark.parametrize("seed", range(50))
def test_loss_non_increasing_full_sampling(seed):
    rng = np.random.default_rng(seed)
    n, f = int(rng.integers(10, 60)), int(rng.integers(1, 8))
    X = rng.normal(size=(n, f))
    y = (X[:, 0] + rng.normal(scale=1.0, size=n) > 0).astype(int)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    p = GbtParams(max_depth=int(rng.integers(1, 6)), learning_rate=float(rng.uniform(0.01, 1.0)),
                  reg_lambda=float(rng.uniform(0, 4)), reg_alpha=float(rng.uniform(0, 2)),
                  min_child_weight=float(rng.uniform(0, 3)), n_rounds=30, gamma=0.0)
    losses = fit_gbt(X, y, p).train_loss_
    assert np.all(np.diff(losses) <= 1e-12)


def test_depth_bound_and_tie_rule(rng):
    X = rng.normal(size=(80, 5))
    y = (X[:, 1] * X[:, 2] > 0).astype(int)
    m = fit_gbt(X, y, GbtParams(max_depth=3, n_rounds=20, subsample=0.7, colsample_bytree=0.6, seed=3))
    assert max(m.tree_depths()) <= 3
    # duplicated column: ties go to the lower feature index
    Xd = np.column_stack([X[:, 1], X[:, 1]])
    m = fit_gbt(Xd, y, GbtParams(max_depth=1, n_rounds=1))
    assert next(m.iter_trees())[0][0] == 0


def test_zero_rounds_is_base_score():
    m = fit_gbt(X2, Y2, GbtParams(n_rounds=0, base_score=0.3))
    np.testing.assert_allclose(predict_prob(m, X2), 0.3)


def test_deterministic_and_serializable(tmp_path, rng):
    X = rng.normal(size=(50, 4))
    y = (X[:, 0] > 0).astype(int)
    p = GbtParams(max_depth=4, n_rounds=15, subsample=0.8, colsample_bytree=0.75, seed=11)
    a, b = fit_gbt(X, y, p), fit_gbt(X, y, p)
    np.testing.assert_array_equal(a.decision_function(X), b.decision_function(X))
    a.save(tmp_path / "m.json")
    c = GradientBoostedTreesClassifier.load(tmp_path / "m.json")
    np.testing.assert_array_equal(c.decision_function(X), a.decision_function(X))
    margins = a.decision_function(X)
    order = np.argsort(margins)
    assert np.all(np.diff(a.predict_proba(X)[order, 1]) >= 0)


def test_sklearn_api(rng):
    est = GradientBoostedTreesClassifier(max_depth=2, n_rounds=5)
    assert clone(est).get_params() == est.get_params()
    X = rng.normal(size=(20, 3))
    y = (X[:, 0] > 0).astype(int)
    assert est.fit(X, y).predict(X).shape == (20,)
    assert est.score(X, y) >= 0.8
    with pytest.raises(ShapeError):
        est.predict(X[:, :2])


def test_degenerate_labels():
    with pytest.raises(DegenerateLabelsError):
        fit_gbt(X2, np.array([1, 1]))
