"""Imaging classifier: crop/resize preprocessing, augmentation and a pooled-linear model.

The built-in model average-pools each of the 8 input channels onto an 8x8x8
grid (a 4096-dim embedding) and applies logistic regression trained with Adam
on binary cross-entropy. Probabilities from external deep encoders can be
plugged in through :func:`load_external_probs` instead.

Flips and 90-degree rotations commute with the block pooling, and i.i.d. voxel
noise pools to i.i.d. Gaussian noise with ``sigma / sqrt(512)``, so training
applies the augmentation directly to embeddings (:func:`augment_pooled`). The
result has the same distribution as pooling :func:`augment`-ed volumes.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import (
    DegenerateLabelsError,
    DuplicateError,
    MissingProbError,
    RangeError,
    SchemaError,
    ShapeError,
)
from .segmentation import bounding_box, one_hot
from .volume_io import SEQUENCES, CaseBundle, LabelMask, Volume3D, check_congruent, resample

SAMPLE_SIZE = 64
N_CHANNELS = 8
N_INTENSITY = 4
POOL_GRID = 8
EMBEDDING_DIM = N_CHANNELS * POOL_GRID**3


@dataclass(frozen=True, eq=False)
class ImageSample:
    channels: np.ndarray  # (8, 64, 64, 64): T1, T1CE, T2, FLAIR, ET, NET, CC, ED
    label: object = None
    case_id: str = ""

    def __post_init__(self):
        ch = np.asarray(self.channels)
        if ch.ndim != 4 or ch.shape[0] != N_CHANNELS:
            raise ShapeError(f"expected (8, n, n, n) channels, got {ch.shape}")
        object.__setattr__(self, "channels", ch)


def crop_box(merged: LabelMask, margin=5):
    """Bounding box of all foreground labels grown by ``margin`` voxels, clipped."""
    return bounding_box(np.asarray(merged.data) > 0, margin)


def _zscore(x):
    std = x.std()
    if std == 0:
        return np.zeros_like(x)
    return (x - x.mean()) / std


def crop_and_resize(bundle: CaseBundle, merged: LabelMask, margin=5, size=SAMPLE_SIZE, label=None):
    """8-channel sample: z-scored intensities (trilinear) and one-hot masks (nearest)."""
    check_congruent([bundle.reference, merged], what="case images and merged mask")
    box = crop_box(merged, margin)
    target = (size, size, size)
    channels = np.empty((N_CHANNELS, size, size, size), dtype=np.float32)
    for c, name in enumerate(SEQUENCES):
        vol = bundle.sequences[name]
        cropped = Volume3D(np.asarray(vol.data, dtype=np.float64)[box], vol.spacing)
        channels[c] = _zscore(np.asarray(resample(cropped, target, "trilinear").data))
    hot = one_hot(merged)
    for c in range(4):
        cropped = LabelMask(hot[c][box], merged.spacing, vocabulary=frozenset({0, 1}))
        channels[N_INTENSITY + c] = resample(cropped, target, "nearest").data
    return ImageSample(channels, label, bundle.case_id)


# -------------------------------------------------------------- augmentation


def _draw_geometry(rng):
    flips = rng.random(3) < 0.5
    k = int(rng.integers(4))
    axis = int(rng.integers(3))
    return flips, k, axis


def _apply_geometry(arr, flips, k, axis):
    """Apply to the spatial axes 1..3 of a channel-first array."""
    for a in range(3):
        if flips[a]:
            arr = np.flip(arr, axis=a + 1)
    if k:
        plane = tuple(1 + a for a in range(3) if a != axis)
        arr = np.rot90(arr, k, axes=plane)
    return np.ascontiguousarray(arr)


def augment(sample: ImageSample, rng, noise_sigma=0.1) -> ImageSample:
    """Random flips (p=0.5 per axis), one 90-degree rotation, noise on intensity channels."""
    flips, k, axis = _draw_geometry(rng)
    ch = _apply_geometry(sample.channels, flips, k, axis)
    if noise_sigma > 0:
        ch = ch.copy()
        ch[:N_INTENSITY] += rng.normal(0.0, noise_sigma, ch[:N_INTENSITY].shape).astype(ch.dtype)
    return ImageSample(ch, sample.label, sample.case_id)


def pool(channels) -> np.ndarray:
    """Average-pool each channel onto an 8x8x8 grid and flatten (4096 values)."""
    ch = np.asarray(channels, dtype=np.float64)
    c, nx, ny, nz = ch.shape
    if nx % POOL_GRID or ny % POOL_GRID or nz % POOL_GRID:
        raise ShapeError(f"spatial dims {ch.shape[1:]} are not divisible by {POOL_GRID}")
    bx, by, bz = nx // POOL_GRID, ny // POOL_GRID, nz // POOL_GRID
    return ch.reshape(c, POOL_GRID, bx, POOL_GRID, by, POOL_GRID, bz).mean(axis=(2, 4, 6)).ravel()


def extract_embedding(model, sample) -> np.ndarray:
    """Pooled representation feeding the linear head (independent of its weights)."""
    channels = sample.channels if isinstance(sample, ImageSample) else sample
    return pool(channels)


def augment_pooled(emb, rng, noise_sigma=0.1, voxels_per_cell=(SAMPLE_SIZE // POOL_GRID) ** 3):
    """:func:`augment` expressed on a 4096-dim embedding."""
    grid = np.asarray(emb, dtype=np.float64).reshape(N_CHANNELS, POOL_GRID, POOL_GRID, POOL_GRID)
    flips, k, axis = _draw_geometry(rng)
    grid = _apply_geometry(grid, flips, k, axis)
    if noise_sigma > 0:
        grid = grid.copy()
        grid[:N_INTENSITY] += rng.normal(
            0.0, noise_sigma / np.sqrt(voxels_per_cell), grid[:N_INTENSITY].shape
        )
    return grid.ravel()


# ------------------------------------------------------------------ model


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def loss_and_grad(w, b, X, y, l2=0.0):
    """Mean binary cross-entropy plus ``l2/2 * |w|^2``, with analytic gradients."""
    z = X @ w + b
    p = _sigmoid(z)
    # log(1 + exp(-z)) for y=1 and log(1 + exp(z)) for y=0
    loss = float(np.mean(np.logaddexp(0.0, np.where(y == 1, -z, z)))) + 0.5 * l2 * float(w @ w)
    r = (p - y) / len(y)
    return loss, X.T @ r + l2 * w, float(r.sum())


class ImageBranchClassifier(ClassifierMixin, BaseEstimator):
    """Pooled-linear image classifier.

    ``fit``/``predict_proba`` accept either full samples of shape
    ``(n, 8, 64, 64, 64)`` or precomputed embeddings of shape ``(n, 4096)``.
    When validation data are given, the weights kept are those with the best
    validation accuracy among the checks every ``eval_every`` epochs (earliest
    wins ties).
    """

    def __init__(self, learning_rate=1e-4, epochs=500, batch_size=8, l2=1e-4, beta1=0.9,
                 beta2=0.999, eps=1e-8, noise_sigma=0.1, augment=True, eval_every=10,
                 random_state=0):
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.l2 = l2
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.noise_sigma = noise_sigma
        self.augment = augment
        self.eval_every = eval_every
        self.random_state = random_state

    @staticmethod
    def _embed(X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 5:
            return np.vstack([pool(x) for x in X])
        if X.ndim == 2 and X.shape[1] == EMBEDDING_DIM:
            return X
        raise ShapeError(f"expected (n, 8, s, s, s) samples or (n, {EMBEDDING_DIM}) embeddings, got {X.shape}")

    def fit(self, X, y, X_val=None, y_val=None):
        E = self._embed(X)
        y = np.asarray(y, dtype=np.float64)
        if len(y) != len(E):
            raise ShapeError("X and y lengths differ")
        if np.unique(y).size < 2:
            raise DegenerateLabelsError("both classes must be present")
        E_val = None if X_val is None or len(X_val) == 0 else self._embed(X_val)
        y_val = None if E_val is None else np.asarray(y_val)

        rng = np.random.default_rng(self.random_state)
        n, d = E.shape
        w = np.zeros(d)
        b = 0.0
        m_w, v_w = np.zeros(d), np.zeros(d)
        m_b = v_b = 0.0
        step = 0
        best = (-1.0, w.copy(), b, 0)
        history = []
        for epoch in range(1, int(self.epochs) + 1):
            perm = rng.permutation(n)
            for start in range(0, n, int(self.batch_size)):
                idx = perm[start : start + int(self.batch_size)]
                if self.augment:
                    Xb = np.vstack([augment_pooled(E[i], rng, self.noise_sigma) for i in idx])
                else:
                    Xb = E[idx]
                _, g_w, g_b = loss_and_grad(w, b, Xb, y[idx], self.l2)
                step += 1
                m_w = self.beta1 * m_w + (1 - self.beta1) * g_w
                v_w = self.beta2 * v_w + (1 - self.beta2) * g_w**2
                m_b = self.beta1 * m_b + (1 - self.beta1) * g_b
                v_b = self.beta2 * v_b + (1 - self.beta2) * g_b**2
                c1 = 1 - self.beta1**step
                c2 = 1 - self.beta2**step
                w = w - self.learning_rate * (m_w / c1) / (np.sqrt(v_w / c2) + self.eps)
                b = b - self.learning_rate * (m_b / c1) / (np.sqrt(v_b / c2) + self.eps)
            if E_val is not None and epoch % int(self.eval_every) == 0:
                acc = float(np.mean((_sigmoid(E_val @ w + b) >= 0.5) == y_val))
                history.append((epoch, acc))
                if acc > best[0]:
                    best = (acc, w.copy(), b, epoch)
        if E_val is not None and best[0] >= 0:
            self.coef_, self.intercept_, self.best_epoch_ = best[1], float(best[2]), best[3]
        else:
            self.coef_, self.intercept_, self.best_epoch_ = w, float(b), int(self.epochs)
        self.val_history_ = history
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = d
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        return self._embed(X) @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        p1 = _sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)

    def to_dict(self):
        check_is_fitted(self, "coef_")
        return {
            "config": self.get_params(),
            "coef": self.coef_.tolist(),
            "intercept": self.intercept_,
            "best_epoch": self.best_epoch_,
        }

    @classmethod
    def from_dict(cls, d):
        model = cls(**d["config"])
        model.coef_ = np.asarray(d["coef"], dtype=np.float64)
        model.intercept_ = float(d["intercept"])
        model.best_epoch_ = int(d["best_epoch"])
        model.classes_ = np.array([0, 1])
        model.n_features_in_ = model.coef_.size
        model.val_history_ = []
        return model

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)


def train_baseline(samples, labels, cfg: dict | None = None, X_val=None, y_val=None):
    return ImageBranchClassifier(**(cfg or {})).fit(samples, labels, X_val, y_val)


def predict_prob(model: ImageBranchClassifier, sample) -> float:
    emb = extract_embedding(model, sample) if not (
        isinstance(sample, np.ndarray) and sample.ndim == 1
    ) else sample
    return float(model.predict_proba(emb[None, :])[0, 1])


# ------------------------------------------------------ external encoders


def load_external_probs(csv_path) -> dict:
    """``case_id -> probability`` from a CSV with columns ``case_id, prob``."""
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        if "case_id" not in cols or "prob" not in cols:
            raise SchemaError(f"{csv_path}: need columns case_id, prob (got {cols})")
        out = {}
        for i, row in enumerate(reader):
            cid = row["case_id"].strip()
            try:
                p = float(row["prob"])
            except ValueError:
                raise RangeError(f"row {i}: prob {row['prob']!r} is not a number") from None
            if not 0.0 <= p <= 1.0:
                raise RangeError(f"row {i}: prob {p} outside [0, 1]")
            if cid in out:
                raise DuplicateError(f"duplicate case_id {cid!r}")
            out[cid] = p
    return out


class ExternalProbabilities:
    """Image branch backed by precomputed per-case probabilities."""

    def __init__(self, probs: dict):
        self.probs = dict(probs)

    def prob(self, case_id):
        try:
            return self.probs[case_id]
        except KeyError:
            raise MissingProbError(f"no external probability for case {case_id!r}") from None

    def probs_for(self, case_ids):
        return np.array([self.prob(c) for c in case_ids])
