import numpy as np
import pytest
from sklearn.base import clone

from plgg_response.exceptions import (DegenerateLabelsError, DuplicateError, MissingProbError, RangeError,
                                      SchemaError, ShapeError)
from plgg_response.image_branch import (EMBEDDING_DIM, ExternalProbabilities, ImageBranchClassifier,
                                        ImageSample, augment, augment_pooled, crop_and_resize, crop_box,
                                        load_external_probs, loss_and_grad, pool, predict_prob)
from plgg_response.segmentation import merge_masks
from plgg_response.synthetic import SynthConfig, make_case
from plgg_response.volume_io import LabelMask


def _rel_err(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_gradient_matches_central_differences(seed):
    rng = np.random.default_rng(seed)
    d = 12
    X = rng.normal(size=(8, d))
    y = rng.integers(0, 2, 8).astype(float)
    w, b, l2 = rng.normal(size=d), float(rng.normal()), float(rng.uniform(0, 0.1))
    _, gw, gb = loss_and_grad(w, b, X, y, l2)
    h = 1e-6
    num = np.array([(loss_and_grad(w + h * e, b, X, y, l2)[0] - loss_and_grad(w - h * e, b, X, y, l2)[0]) / (2 * h)
                    for e in np.eye(d)])
    num_b = (loss_and_grad(w, b + h, X, y, l2)[0] - loss_and_grad(w, b - h, X, y, l2)[0]) / (2 * h)
    assert _rel_err(gw, num) < 1e-5
    assert abs(gb - num_b) / max(abs(gb), 1e-12) < 1e-5 or abs(gb - num_b) < 1e-9


def test_loss_stable_for_large_margins():
    X = np.array([[1000.0], [-1000.0]])
    loss, gw, gb = loss_and_grad(np.array([1.0]), 0.0, X, np.array([1.0, 0.0]))
    assert loss == pytest.approx(0.0, abs=1e-12) and np.isfinite(gw).all()


def test_pool_shape_and_values(rng):
    ch = rng.normal(size=(8, 16, 16, 16))
    e = pool(ch)
    assert e.shape == (EMBEDDING_DIM,)
    assert e[0] == pytest.approx(ch[0, :2, :2, :2].mean())
    with pytest.raises(ShapeError):
        pool(rng.normal(size=(8, 12, 12, 12)))


def test_pooled_augmentation_commutes(rng):
    ch = rng.normal(size=(8, 16, 16, 16))
    s = ImageSample(ch)
    for seed in range(10):
        a = pool(augment(s, np.random.default_rng(seed), noise_sigma=0.0).channels)
        b = augment_pooled(pool(ch), np.random.default_rng(seed), noise_sigma=0.0)
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_augment_keeps_masks_binary_and_shape(rng):
    ch = np.zeros((8, 16, 16, 16))
    ch[4, 2:5, 3:9, 1:2] = 1
    out = augment(ImageSample(ch), rng).channels
    assert out.shape == ch.shape
    assert set(np.unique(out[4:])) <= {0.0, 1.0} and out[4].sum() == ch[4].sum()


def test_crop_box_margin():
    data = np.zeros((30, 30, 30), dtype=np.int16)
    data[10, 10, 10] = 1
    box = crop_box(LabelMask(data, (1.0, 1.0, 1.0)), margin=5)
    assert [s.stop - s.start for s in box] == [11, 11, 11]
    data[:] = 0
    data[0, 29, 15] = 2
    box = crop_box(LabelMask(data, (1.0, 1.0, 1.0)), margin=5)
    assert [(s.start, s.stop) for s in box] == [(0, 6), (24, 30), (10, 21)]


def test_crop_and_resize_synthetic_case():
    case = make_case(0, 1, SynthConfig(n_cases=4, grid=(24, 24, 24)))
    sample = crop_and_resize(case.bundle, merge_masks(case.masks), size=16)
    ch = sample.channels
    assert ch.shape == (8, 16, 16, 16)
    for c in range(4):
        assert abs(ch[c].mean()) < 1e-5 and ch[c].std() == pytest.approx(1.0, abs=1e-4)
    assert set(np.unique(ch[4:])) <= {0.0, 1.0}
    assert np.all(ch[4:].sum(axis=0) <= 1)


def _separable(rng, n=40):
    y = np.arange(n) % 2
    X = rng.normal(size=(n, EMBEDDING_DIM)) * 0.1
    X[:, :64] += (2 * y[:, None] - 1)
    return X, y


def test_fits_separable_data(rng):
    X, y = _separable(rng)
    clf = ImageBranchClassifier(learning_rate=1e-2, epochs=30, noise_sigma=0.0).fit(X, y)
    assert clf.score(X, y) == 1.0
    assert clf.predict_proba(X).shape == (40, 2)
    assert predict_prob(clf, X[1]) > 0.5


def test_validation_selection_and_determinism(rng):
    X, y = _separable(rng)
    kw = dict(learning_rate=1e-3, epochs=40, eval_every=10)
    a = ImageBranchClassifier(**kw).fit(X[:30], y[:30], X[30:], y[30:])
    b = ImageBranchClassifier(**kw).fit(X[:30], y[:30], X[30:], y[30:])
    np.testing.assert_array_equal(a.coef_, b.coef_)
    assert [e for e, _ in a.val_history_] == [10, 20, 30, 40]
    best = max(acc for _, acc in a.val_history_)
    assert a.best_epoch_ == next(e for e, acc in a.val_history_ if acc == best)
    c = ImageBranchClassifier.from_dict(a.to_dict())
    np.testing.assert_array_equal(c.decision_function(X), a.decision_function(X))
    assert clone(a).get_params() == a.get_params()


def test_fit_errors(rng):
    X, y = _separable(rng, 10)
    with pytest.raises(DegenerateLabelsError):
        ImageBranchClassifier(epochs=1).fit(X, np.ones(10))
    with pytest.raises(ShapeError):
        ImageBranchClassifier(epochs=1).fit(X[:, :100], y)


def test_external_probs(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text("case_id,prob\nA,0.2\nB,1.0\n")
    ext = ExternalProbabilities(load_external_probs(p))
    np.testing.assert_array_equal(ext.probs_for(["B", "A"]), [1.0, 0.2])
    with pytest.raises(MissingProbError):
        ext.prob("C")
    for text, err in [("id,prob\nA,0.1\n", SchemaError), ("case_id,prob\nA,1.5\n", RangeError),
                      ("case_id,prob\nA,x\n", RangeError), ("case_id,prob\nA,0.1\nA,0.2\n", DuplicateError)]:
        p.write_text(text)
        with pytest.raises(err):
            load_external_probs(p)
