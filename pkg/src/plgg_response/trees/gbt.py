"""Regularized gradient-boosted trees for binary classification.

Each round fits a tree to the gradient ``g = p - y`` and hessian ``h = p(1-p)``
of the logistic loss. A split is kept only when

    gain = 1/2 [T(G_L)^2/(H_L+lambda) + T(G_R)^2/(H_R+lambda) - T(G)^2/(H+lambda)] - gamma > 0

where ``T`` soft-thresholds by ``reg_alpha``; leaves get ``-T(G)/(H+lambda)``.
The margin is ``logit(base_score) + learning_rate * sum(trees)``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..exceptions import DegenerateLabelsError, ShapeError
from . import _kernels


@dataclass(frozen=True)
class GbtParams:
    max_depth: int = 6
    min_child_weight: float = 1.0
    subsample: float = 1.0
    colsample_bytree: float = 1.0
    learning_rate: float = 0.3
    reg_alpha: float = 0.0
    reg_lambda: float = 1.0
    gamma: float = 0.0
    n_rounds: int = 100
    base_score: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if int(self.max_depth) < 1:
            raise ValueError("max_depth must be >= 1")
        if not (0 < self.subsample <= 1 and 0 < self.colsample_bytree <= 1):
            raise ValueError("subsample and colsample_bytree must lie in (0, 1]")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if min(self.reg_alpha, self.reg_lambda, self.gamma, self.min_child_weight) < 0:
            raise ValueError("reg_alpha, reg_lambda, gamma and min_child_weight must be >= 0")
        if not 0 < self.base_score < 1:
            raise ValueError("base_score must lie in (0, 1)")
        if int(self.n_rounds) < 0:
            raise ValueError("n_rounds must be >= 0")

    def estimator(self, **overrides):
        kw = asdict(self)
        kw["random_state"] = kw.pop("seed")
        kw.update(overrides)
        return GradientBoostedTreesClassifier(**kw)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def logit(p):
    return float(np.log(p / (1.0 - p)))


def sigmoid(m):
    m = np.asarray(m, dtype=np.float64)
    return 1.0 / (1.0 + np.exp(-m))


class GradientBoostedTreesClassifier(ClassifierMixin, BaseEstimator):
    """Exact-greedy boosted trees with logistic loss.

    Fitting is deterministic given the data order and ``random_state``. Row
    subsampling draws a fresh Bernoulli mask each round; column subsampling
    draws ``max(1, floor(colsample_bytree * n_features))`` features per tree.

    Attributes
    ----------
    trees_ : dict of arrays
        ``feature``, ``threshold``, ``left``, ``right``, ``value``, ``cover``
        and ``gain``, each of shape ``(n_rounds, capacity)``, plus ``n_nodes``.
    train_loss_ : ndarray of shape (n_rounds + 1,)
        Mean training log-loss before the first round and after each round.
    """

    def __init__(self, max_depth=6, min_child_weight=1.0, subsample=1.0, colsample_bytree=1.0,
                 learning_rate=0.3, reg_alpha=0.0, reg_lambda=1.0, gamma=0.0, n_rounds=100,
                 base_score=0.5, random_state=0):
        self.max_depth = max_depth
        self.min_child_weight = min_child_weight
        self.subsample = subsample
        self.colsample_bytree = colsample_bytree
        self.learning_rate = learning_rate
        self.reg_alpha = reg_alpha
        self.reg_lambda = reg_lambda
        self.gamma = gamma
        self.n_rounds = n_rounds
        self.base_score = base_score
        self.random_state = random_state

    @property
    def params(self) -> GbtParams:
        kw = self.get_params()
        kw["seed"] = kw.pop("random_state")
        return GbtParams(**kw)

    def fit(self, X, y, feature_names=None):
        params = self.params
        X, y = check_X_y(X, y, dtype=np.float64)
        y = y.astype(np.float64)
        if X.shape[0] < 2:
            raise DegenerateLabelsError("need at least 2 rows")
        if not np.isin(y, (0.0, 1.0)).all():
            raise ValueError("labels must be 0/1")
        if np.unique(y).size < 2:
            raise DegenerateLabelsError("both classes must be present")
        n, F = X.shape
        rounds = int(params.n_rounds)
        depth = int(params.max_depth)
        rng = np.random.default_rng(params.seed)

        if params.subsample < 1.0:
            row_masks = rng.random((rounds, n)) < params.subsample
        else:
            row_masks = np.ones((rounds, n), dtype=bool)
        col_masks = np.zeros((rounds, F), dtype=bool)
        k = max(1, int(np.floor(params.colsample_bytree * F)))
        for t in range(rounds):
            if k >= F:
                col_masks[t] = True
            else:
                col_masks[t, rng.choice(F, size=k, replace=False)] = True

        cap = 2 ** (depth + 1) - 1
        trees = {
            "feature": np.full((rounds, cap), -1, dtype=np.int64),
            "threshold": np.zeros((rounds, cap)),
            "left": np.full((rounds, cap), -1, dtype=np.int64),
            "right": np.full((rounds, cap), -1, dtype=np.int64),
            "value": np.zeros((rounds, cap)),
            "cover": np.zeros((rounds, cap)),
            "gain": np.zeros((rounds, cap)),
            "n_nodes": np.zeros(rounds, dtype=np.int64),
        }
        order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
        self.base_margin_ = logit(params.base_score)
        losses = np.zeros(rounds + 1)
        _kernels.boost(
            X, y, order, row_masks, col_masks, self.base_margin_, float(params.learning_rate), depth,
            float(params.min_child_weight), float(params.reg_lambda), float(params.reg_alpha),
            float(params.gamma), trees["feature"], trees["threshold"], trees["left"], trees["right"],
            trees["value"], trees["cover"], trees["gain"], trees["n_nodes"], losses,
        )
        self.trees_ = trees
        self.train_loss_ = losses
        self.n_features_in_ = F
        self.classes_ = np.array([0, 1])
        self.feature_names_ = tuple(feature_names) if feature_names is not None else tuple(
            f"f{i}" for i in range(F)
        )
        return self

    def _check_X(self, X):
        check_is_fitted(self, "trees_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ShapeError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X

    def decision_function(self, X):
        """Margin (log-odds) per row."""
        X = self._check_X(X)
        out = np.full(X.shape[0], self.base_margin_)
        t = self.trees_
        for i in range(len(t["n_nodes"])):
            _kernels.predict_tree(X, t["feature"][i], t["threshold"][i], t["left"][i],
                                  t["right"][i], t["value"][i], out, float(self.learning_rate))
        return out

    def predict_proba(self, X):
        p1 = sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)

    def iter_trees(self):
        """``(feature, threshold, left, right, value, cover, gain)`` trimmed per tree."""
        t = self.trees_
        for i, n in enumerate(t["n_nodes"]):
            yield tuple(t[k][i, :n] for k in ("feature", "threshold", "left", "right", "value", "cover", "gain"))

    def tree_depths(self):
        depths = []
        for feature, _, left, right, *_ in self.iter_trees():
            level = {0: 0}
            for nd in range(len(feature)):
                if feature[nd] >= 0:
                    level[int(left[nd])] = level[nd] + 1
                    level[int(right[nd])] = level[nd] + 1
            depths.append(max(level.values()))
        return depths

    # ------------------------------------------------------------ JSON

    def to_dict(self):
        check_is_fitted(self, "trees_")
        trees = []
        for feature, threshold, left, right, value, cover, gain in self.iter_trees():
            trees.append(
                {
                    "feature": feature.tolist(),
                    "threshold": threshold.tolist(),
                    "left": left.tolist(),
                    "right": right.tolist(),
                    "value": value.tolist(),
                    "cover": cover.tolist(),
                    "gain": gain.tolist(),
                }
            )
        return {
            "params": asdict(self.params),
            "feature_names": list(self.feature_names_),
            "base_margin": self.base_margin_,
            "trees": trees,
        }

    @classmethod
    def from_dict(cls, d):
        est = GbtParams.from_dict(d["params"]).estimator()
        depth = int(est.max_depth)
        cap = 2 ** (depth + 1) - 1
        rounds = len(d["trees"])
        trees = {
            "feature": np.full((rounds, cap), -1, dtype=np.int64),
            "threshold": np.zeros((rounds, cap)),
            "left": np.full((rounds, cap), -1, dtype=np.int64),
            "right": np.full((rounds, cap), -1, dtype=np.int64),
            "value": np.zeros((rounds, cap)),
            "cover": np.zeros((rounds, cap)),
            "gain": np.zeros((rounds, cap)),
            "n_nodes": np.zeros(rounds, dtype=np.int64),
        }
        for i, tree in enumerate(d["trees"]):
            n = len(tree["feature"])
            trees["n_nodes"][i] = n
            for key in ("feature", "threshold", "left", "right", "value", "cover", "gain"):
                trees[key][i, :n] = tree[key]
        est.trees_ = trees
        est.base_margin_ = float(d["base_margin"])
        est.feature_names_ = tuple(d["feature_names"])
        est.n_features_in_ = len(est.feature_names_)
        est.classes_ = np.array([0, 1])
        est.train_loss_ = np.array([])
        return est

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def fit_gbt(X, y, params: GbtParams = GbtParams(), feature_names=None):
    return params.estimator().fit(X, y, feature_names=feature_names)


def predict_prob(model: GradientBoostedTreesClassifier, X):
    """Probability of class 1 for each row of ``X`` (or a single row)."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    p = model.predict_proba(X[None, :] if single else X)[:, 1]
    return float(p[0]) if single else p
