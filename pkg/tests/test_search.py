import numpy as np
import pytest

from plgg_response.trees import FEATUREFUSE_SPACE, GBT_SPACE, RF_SPACE, SearchResult, random_search
from plgg_response.trees import sample_candidates, select_model
from plgg_response.trees.forest import fit_random_forest, oob_rows
from plgg_response.trees.search import FloatRange, IntRange, rf_factory
from plgg_response.exceptions import DegenerateLabelsError


def _decimals_ok(v, d):
    return abs(v * 10**d - round(v * 10**d)) < 1e-9


@pytest.mark.parametrize("space", [GBT_SPACE, FEATUREFUSE_SPACE, RF_SPACE])
def test_candidates_in_bounds_with_rounding(space):
    cands = sample_candidates(space, 1000, seed=7)
    assert len(cands) == 1000
    for c in cands:
        for name, r in space.items():
            v = c[name]
            assert r.low <= v <= r.high
            if isinstance(r, IntRange):
                assert isinstance(v, int)
            else:
                assert _decimals_ok(v, r.decimals)


def test_space_bounds():
    assert (GBT_SPACE["max_depth"].low, GBT_SPACE["max_depth"].high) == (2, 7)
    assert GBT_SPACE["subsample"] == FloatRange(0.6, 0.85, 2)
    assert GBT_SPACE["reg_alpha"] == FloatRange(0.0, 4.0, 1)
    assert GBT_SPACE["gamma"] == FloatRange(0.0, 0.5, 1)
    assert FEATUREFUSE_SPACE["min_child_weight"] == IntRange(2, 14)
    assert RF_SPACE["n_estimators"] == IntRange(100, 1000)


def test_seeded_sampling_reproducible():
    assert sample_candidates(GBT_SPACE, 20, 3) == sample_candidates(GBT_SPACE, 20, 3)
    assert sample_candidates(GBT_SPACE, 20, 3) != sample_candidates(GBT_SPACE, 20, 4)


def test_tie_break_smallest_depth_then_index():
    cands = [{"max_depth": d} for d in (5, 3, 7, 3, 4)]
    res = SearchResult(cands, np.array([0.7, 0.7, 0.7, 0.7, 0.6]))
    assert select_model(res) == 1
    assert res.ranking() == [1, 3, 0, 2, 4]
    res = SearchResult(cands, np.array([0.5, 0.7, 0.9, 0.7, 0.6]))
    assert select_model(res) == 2


def test_search_log_roundtrip(tmp_path):
    cands = sample_candidates(GBT_SPACE, 5, 0)
    res = SearchResult(cands, np.linspace(0, 1, 5), np.array([0.1, np.nan, 0.3, np.nan, 0.5]), 4)
    res.write_csv(tmp_path / "s.csv")
    back = SearchResult.read_csv(tmp_path / "s.csv")
    assert back.candidates == cands and back.chosen == 4
    np.testing.assert_array_equal(back.val_scores, res.val_scores)
    assert np.isnan(back.test_scores[1]) and back.test_scores[4] == 0.5


def test_random_search_gbt_and_rf(rng):
    X = rng.normal(size=(60, 4))
    y = (X[:, 0] > 0).astype(int)
    res = random_search(GBT_SPACE, X[:40], y[:40], X[40:], y[40:], n=8, seed=1)
    assert len(res.val_scores) == 8 and 0 <= res.chosen < 8
    assert res.val_scores[res.chosen] == res.val_scores.max()
    res = random_search(RF_SPACE, X[:40], y[:40], X[40:], y[40:], n=2, seed=1, fit=rf_factory(0))
    assert res.val_scores.max() >= 0.7


def test_forest_wrapper(rng):
    X = rng.normal(size=(30, 3))
    y = (X[:, 0] > 0).astype(int)
    m = fit_random_forest(X, y, {"n_estimators": 10, "max_depth": 5})
    assert m.predict_proba(X).shape == (30, 2)
    assert len(oob_rows(m, 30)) == 10
    with pytest.raises(DegenerateLabelsError):
        fit_random_forest(X, np.zeros(30))
