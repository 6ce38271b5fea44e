from itertools import combinations
from math import factorial

import numpy as np
import pytest

from plgg_response.exceptions import ShapeError
from plgg_response.trees import GbtParams, fit_gbt, mean_abs_shap, shap_values
from plgg_response.trees.gbt import logit


def _subset_values(model, x, M):
    """v(S) for every subset bitmask S: path-dependent conditional expectation of the margin."""
    masks = np.arange(2**M)
    total = np.full(masks.size, model.base_margin_)
    lr = model.learning_rate
    for feature, threshold, left, right, value, cover, _ in model.iter_trees():

        def walk(nd):
            if feature[nd] < 0:
                return np.full(masks.size, value[nd])
            known = (masks >> feature[nd]) & 1 == 1
            vl, vr = walk(left[nd]), walk(right[nd])
            hot = vl if x[feature[nd]] < threshold[nd] else vr
            avg = (cover[left[nd]] * vl + cover[right[nd]] * vr) / cover[nd]
            return np.where(known, hot, avg)

        total += lr * walk(0)
    return total


def brute_force_shapley(model, x):
    M = model.n_features_in_
    v = _subset_values(model, x, M)
    phi = np.zeros(M)
    for j in range(M):
        for size in range(M):
            w = factorial(size) * factorial(M - size - 1) / factorial(M)
            others = [k for k in range(M) if k != j]
            for S in combinations(others, size):
                s = sum(1 << k for k in S)
                phi[j] += w * (v[s | (1 << j)] - v[s])
    return phi, v[0]


def _model(seed, n_features, depth, rounds):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(60, n_features))
    y = ((X[:, 0] + X[:, -1] * rng.normal(size=60)) > 0).astype(int)
    p = GbtParams(max_depth=depth, n_rounds=rounds, learning_rate=0.3, subsample=0.8,
                  colsample_bytree=0.8, seed=seed, min_child_weight=0.5)
    return fit_gbt(X, y, p), X


@pytest.mark.parametrize("seed, n_features", [(0, 2), (1, 3), (2, 5), (3, 8), (4, 12)])
def test_matches_exhaustive_shapley(seed, n_features):
    model, X = _model(seed, n_features, depth=3 if n_features > 8 else 4, rounds=6)
    for x in X[:2]:
        phi, base = brute_force_shapley(model, x)
        sv = shap_values(model, x)
        np.testing.assert_allclose(sv.phi, phi, atol=1e-9)
        assert sv.base_value == pytest.approx(base, abs=1e-9)


def test_local_accuracy_random_models():
    for seed in range(20):
        model, X = _model(100 + seed, 6, depth=int(1 + seed % 6), rounds=15)
        margins = model.decision_function(X[:5])
        for x, m in zip(X[:5], margins):
            assert abs(shap_values(model, x).margin - m) <= 1e-9


def test_zero_round_model():
    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    model = fit_gbt(X, np.array([0, 1]), GbtParams(n_rounds=0, base_score=0.2))
    sv = shap_values(model, X[0])
    assert not sv.phi.any() and sv.base_value == pytest.approx(logit(0.2))


def test_width_mismatch():
    model, X = _model(0, 3, 2, 2)
    with pytest.raises(ShapeError):
        shap_values(model, X[0, :2])


def test_mean_abs_ranking_sorted():
    folds = [_model(s, 4, 3, 10) for s in range(3)]
    ranking = mean_abs_shap([(m, X[:10]) for m, X in folds], ["a", "b", "c", "d"])
    values = [r["mean_abs_shap"] for r in ranking]
    assert values == sorted(values, reverse=True)
    assert {r["feature"] for r in ranking} == {"a", "b", "c", "d"}
