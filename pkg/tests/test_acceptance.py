"""Acceptance suite, one test per numbered criterion.

A pass/fail line per criterion is printed in the ``acceptance criteria``
section of the terminal summary.
"""
import time

import numpy as np
import pytest

from oracles import glcm, gldm, glrlm, glszm, random_phantom, trim
from test_shap import brute_force_shapley
from plgg_response.cohort import Branch, derive_outcome, outcome_branch
from plgg_response.evaluation import CvConfig, ensemble_prob, make_folds, run_cv
from plgg_response.evaluation.cv import report_json
from plgg_response.evaluation.folds import check_no_leakage
from plgg_response.evaluation.metrics import from_confusion
from plgg_response.image_branch import EMBEDDING_DIM, loss_and_grad
from plgg_response.pipeline import synthetic_cohort_data
from plgg_response.radiomics import (DiscretizedRoi, glcm_features, glcm_matrices, gldm_matrix, glrlm_matrices,
                                     glszm_features, glszm_matrix, shape_features)
from plgg_response.radiomics.firstorder import firstorder_from_values
from plgg_response.radiomics.texture import normalize
from plgg_response.synthetic import SynthConfig, generate_cohort, replay_paper_cohort_counts
from plgg_response.trees import (FEATUREFUSE_SPACE, GBT_SPACE, GbtParams, SearchResult, fit_gbt,
                                 sample_candidates, select_model, shap_values)
from plgg_response.trees.search import IntRange


def criterion(n):
    return pytest.mark.criterion(n)


def end_to_end(effect, seed=0):
    t0 = time.perf_counter()
    data = synthetic_cohort_data(generate_cohort(SynthConfig(n_cases=105, effect=effect, seed=seed)))
    report, plan, outcomes = run_cv(data, CvConfig(fold_seed=seed, search_seed=seed))
    return report, plan, outcomes, time.perf_counter() - t0


@pytest.fixture(scope="session")
def planted_run():
    return end_to_end(0.8)


# 1 ---------------------------------------------------------------------------
@criterion(1)
def test_c01_labeling_fidelity():
    recs = replay_paper_cohort_counts()
    labels = [derive_outcome(r) for r in recs]
    assert (labels.count(1), labels.count(0)) == (42, 63)
    branches = [outcome_branch(r) for r in recs]
    hist = (branches.count(Branch.DECEASED), branches.count(Branch.NO_EFS), branches.count(Branch.PRE_CHEMO),
            branches.count(Branch.DURING_CHEMO) + branches.count(Branch.AFTER_CHEMO))
    assert hist == (7, 41, 1, 56)


# 2 ---------------------------------------------------------------------------
@criterion(2)
def test_c02_metrics_arithmetic():
    rep = from_confusion([[54, 9], [24, 18]])
    assert abs(100 * rep.accuracy - 68.57) <= 0.01
    assert abs(rep.recall(0) - 0.857) <= 0.001
    assert abs(rep.precision(0) - 0.692) <= 0.001


# 3 ---------------------------------------------------------------------------
@criterion(3)
def test_c03_radiomics_oracle_equivalence():
    for seed in range(200):
        levels = random_phantom(np.random.default_rng(seed), shape=(8, 8, 8), max_levels=4)
        roi = DiscretizedRoi.from_levels(levels)
        ng = roi.n_levels
        assert ng <= 4
        P_cm, P_rl, P_sz, P_d = glcm_matrices(roi), glrlm_matrices(roi), glszm_matrix(roi), gldm_matrix(roi)
        np.testing.assert_array_equal(P_cm, glcm(levels, ng))
        np.testing.assert_array_equal(trim(P_rl), trim(glrlm(levels, ng)))
        np.testing.assert_array_equal(trim(P_sz), trim(glszm(levels, ng)))
        np.testing.assert_array_equal(P_d, gldm(levels, ng))
        for P in [*P_cm, *P_rl, P_sz, P_d]:
            if P.sum() > 0:
                assert abs(normalize(P).sum() - 1.0) <= 1e-12


# 4 ---------------------------------------------------------------------------
@criterion(4)
def test_c04_radiomics_analytic_cases():
    const = DiscretizedRoi.from_levels(np.ones((4, 4, 4), dtype=int))
    assert glcm_features(const)["Idmn"] == 1.0
    assert glszm_features(const)["ZoneEntropy"] == 0.0
    cube = shape_features(np.ones((5, 5, 5), bool))
    assert cube["Elongation"] == 1.0 and cube["Flatness"] == 1.0
    assert firstorder_from_values(np.array([-3.0, -1.0, 0.0, 1.0, 3.0]))["Skewness"] == 0.0
    r = 10
    idx = np.indices((2 * r + 5,) * 3) - (r + 2)
    ball = (idx**2).sum(axis=0) <= r * r
    assert 0.9 <= shape_features(ball)["Sphericity"] <= 1.1


# 5 ---------------------------------------------------------------------------
def _two_sample_leaves(lam):
    model = fit_gbt(np.array([[0.0], [1.0]]), np.array([0, 1]),
                    GbtParams(max_depth=1, learning_rate=1.0, reg_lambda=lam, reg_alpha=0.0, gamma=0.0,
                              n_rounds=1, min_child_weight=0.0, base_score=0.5))
    feature, _, _, _, value, *_ = next(model.iter_trees())
    return value[feature < 0]


@criterion(5)
def test_c05_gbt_oracle():
    for seed in range(50):
        rng = np.random.default_rng(seed)
        n, f = int(rng.integers(10, 80)), int(rng.integers(1, 10))
        X = rng.normal(size=(n, f))
        y = (X[:, 0] + rng.normal(size=n) > 0).astype(int)
        y[:2] = [0, 1]
        p = GbtParams(max_depth=int(rng.integers(2, 8)), learning_rate=float(rng.uniform(0.01, 0.5)),
                      reg_lambda=float(rng.uniform(0, 4)), reg_alpha=float(rng.uniform(0, 4)),
                      min_child_weight=float(rng.integers(1, 8)), n_rounds=40, gamma=0.0)
        assert np.all(np.diff(fit_gbt(X, y, p).train_loss_) <= 1e-12)
    assert np.max(np.abs(_two_sample_leaves(0.0) - np.array([-2.0, 2.0]))) <= 1e-12
    assert np.max(np.abs(_two_sample_leaves(1.0) - np.array([-1.0, 1.0]))) <= 1e-12


# 6 ---------------------------------------------------------------------------
@criterion(6)
def test_c06_treeshap():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        f = int(rng.integers(1, 13))
        X = rng.normal(size=(50, f))
        y = (X @ rng.normal(size=f) + rng.normal(size=50) > 0).astype(int)
        y[:2] = [0, 1]
        model = fit_gbt(X, y, GbtParams(max_depth=int(rng.integers(1, 6)), n_rounds=int(rng.integers(1, 12)),
                                        learning_rate=0.3, subsample=0.8, colsample_bytree=0.8, seed=seed,
                                        min_child_weight=0.5))
        x = X[int(rng.integers(50))]
        sv = shap_values(model, x)
        assert abs(sv.phi.sum() + sv.base_value - model.decision_function(x[None, :])[0]) <= 1e-9
        phi, base = brute_force_shapley(model, x)
        assert np.max(np.abs(sv.phi - phi)) <= 1e-9 and abs(sv.base_value - base) <= 1e-9


# 7 ---------------------------------------------------------------------------
@criterion(7)
def test_c07_search_bounds_and_tie_break():
    for space in (GBT_SPACE, FEATUREFUSE_SPACE):
        for cand in sample_candidates(space, 1000, seed=0):
            for name, r in space.items():
                v = cand[name]
                assert r.low <= v <= r.high
                if isinstance(r, IntRange):
                    assert isinstance(v, int)
                else:
                    assert abs(v * 10**r.decimals - round(v * 10**r.decimals)) < 1e-9
    assert {GBT_SPACE[k].decimals for k in ("subsample", "colsample_bytree", "learning_rate")} == {2}
    assert {GBT_SPACE[k].decimals for k in ("reg_alpha", "reg_lambda", "gamma")} == {1}
    res = SearchResult([{"max_depth": d} for d in (6, 4, 2, 4, 2)], np.array([0.8, 0.9, 0.9, 0.9, 0.9]))
    assert select_model(res) == 2


# 8 ---------------------------------------------------------------------------
@criterion(8)
def test_c08_cv_protocol(planted_run):
    ids = [f"c{i:03d}" for i in range(105)]
    plan = make_folds(ids, seed=0)
    assert plan.sizes() == [(74, 10, 21)] * 5
    tests = [c for f in plan for c in f.test]
    assert len(tests) == len(set(tests)) == 105 and set(tests) == set(ids)
    _, plan, outcomes, _ = planted_run
    assert plan.sizes() == [(74, 10, 21)] * 5
    for o in outcomes:
        check_no_leakage(o.fold, encoder_vocabulary=o.encoder.fit_ids_)


# 9 ---------------------------------------------------------------------------
@criterion(9)
def test_c09_ensemble_threshold():
    rng = np.random.default_rng(0)
    f, h = rng.random(100_000), rng.random(100_000)
    g = ensemble_prob(f, h)
    assert np.array_equal(g, (f + h) / 2)
    assert np.all(np.minimum(f, h) <= g) and np.all(g <= np.maximum(f, h))


# 10 --------------------------------------------------------------------------
@criterion(10)
def test_c10_gradient_check():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(8, EMBEDDING_DIM))
        y = rng.integers(0, 2, 8).astype(float)
        w, b = rng.normal(scale=0.02, size=EMBEDDING_DIM), float(rng.normal())
        _, gw, gb = loss_and_grad(w, b, X, y, 1e-4)
        analytic = np.append(gw, gb)
        h = 1e-6
        numeric = np.empty(EMBEDDING_DIM + 1)
        for j in range(EMBEDDING_DIM):
            e = np.zeros(EMBEDDING_DIM)
            e[j] = h
            numeric[j] = (loss_and_grad(w + e, b, X, y, 1e-4)[0] - loss_and_grad(w - e, b, X, y, 1e-4)[0]) / (2 * h)
        numeric[-1] = (loss_and_grad(w, b + h, X, y, 1e-4)[0] - loss_and_grad(w, b - h, X, y, 1e-4)[0]) / (2 * h)
        rel = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic), np.linalg.norm(numeric))
        assert rel <= 1e-5


# 11 --------------------------------------------------------------------------
@criterion(11)
def test_c11_signal_recovery(planted_run):
    report, _, _, seconds = planted_run
    print(f"planted run: {seconds:.1f}s, pooled AUC {report['auc']:.4f}, "
          f"top SHAP feature {report['shap_ranking'][0]['feature']}")
    assert seconds < 600
    assert report["auc"] > 0.7
    assert report["shap_ranking"][0]["feature"] == "age_at_event_days"
    null_report, *_ = end_to_end(0.0)
    print(f"null run: pooled AUC {null_report['auc']:.4f}")
    assert 0.35 <= null_report["auc"] <= 0.65


# 12 --------------------------------------------------------------------------
@criterion(12)
def test_c12_determinism(planted_run):
    first, *_, first_seconds = planted_run
    again, *_, seconds = end_to_end(0.8)
    assert report_json(again).encode() == report_json(first).encode()
    assert seconds < 2 * max(first_seconds, 1.0)
