"""Exact path-dependent TreeSHAP for :class:`GradientBoostedTreesClassifier`.

Attributions are on the margin (log-odds) scale, so that for every row
``base_value + phi.sum() == decision_function(row)``. Background
expectations are weighted by each node's training hessian cover.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import ShapeError
from . import _kernels


@dataclass(frozen=True, eq=False)
class ShapVector:
    phi: np.ndarray
    base_value: float
    feature_names: tuple = ()

    @property
    def margin(self):
        return self.base_value + float(self.phi.sum())


def expected_margin(model) -> float:
    lr = float(model.learning_rate)
    total = model.base_margin_
    for feature, _, left, right, value, cover, _ in model.iter_trees():
        total += lr * _kernels.expected_value(feature, left, right, value, cover, len(feature))
    return float(total)


def shap_values(model, row) -> ShapVector:
    """Per-feature attributions of one row."""
    x = np.asarray(row, dtype=np.float64).ravel()
    if x.shape[0] != model.n_features_in_:
        raise ShapeError(f"expected {model.n_features_in_} features, got {x.shape[0]}")
    phi = np.zeros(model.n_features_in_)
    lr = float(model.learning_rate)
    depth = int(model.max_depth)
    for feature, threshold, left, right, value, cover, _ in model.iter_trees():
        if len(feature) == 1:
            continue  # single leaf: constant tree, no attribution
        _kernels.tree_shap(x, feature, threshold, left, right, value * lr, cover, depth, phi)
    return ShapVector(phi, expected_margin(model), tuple(model.feature_names_))


def shap_matrix(model, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return np.vstack([shap_values(model, x).phi for x in X]) if len(X) else np.zeros((0, model.n_features_in_))


def mean_abs_shap(models_and_tables, feature_names=None):
    """Rank features by mean |phi|, averaged within each fold then across folds.

    ``models_and_tables`` is a sequence of ``(model, X)`` pairs, one per fold
    (a single pair is accepted too). Returns a list of dicts sorted by
    decreasing mean, ties broken by feature order.
    """
    if isinstance(models_and_tables, tuple) and len(models_and_tables) == 2 and hasattr(
        models_and_tables[0], "trees_"
    ):
        models_and_tables = [models_and_tables]
    per_fold = []
    for model, X in models_and_tables:
        phi = shap_matrix(model, X)
        per_fold.append(np.abs(phi).mean(axis=0) if len(phi) else np.zeros(model.n_features_in_))
        if feature_names is None:
            feature_names = model.feature_names_
    per_fold = np.vstack(per_fold)
    mean = per_fold.mean(axis=0)
    std = per_fold.std(axis=0)
    order = sorted(range(len(mean)), key=lambda j: (-mean[j], j))
    return [
        {"feature": feature_names[j], "mean_abs_shap": float(mean[j]), "std": float(std[j])}
        for j in order
    ]
