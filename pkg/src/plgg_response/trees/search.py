"""Bounded random hyperparameter search and model selection."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .forest import fit_random_forest
from .gbt import GbtParams, fit_gbt


@dataclass(frozen=True)
class IntRange:
    low: int
    high: int

    def sample(self, rng):
        return int(rng.integers(self.low, self.high + 1))

    def contains(self, v):
        return float(v).is_integer() and self.low <= v <= self.high


@dataclass(frozen=True)
class FloatRange:
    low: float
    high: float
    decimals: int

    def sample(self, rng):
        return round(float(rng.uniform(self.low, self.high)), self.decimals)

    def contains(self, v):
        return self.low <= v <= self.high and round(v, self.decimals) == v


# boosted-tree space of the tabular model
GBT_SPACE = {
    "max_depth": IntRange(2, 7),
    "min_child_weight": IntRange(1, 6),
    "subsample": FloatRange(0.6, 0.85, 2),
    "colsample_bytree": FloatRange(0.6, 0.85, 2),
    "learning_rate": FloatRange(0.01, 0.05, 2),
    "reg_alpha": FloatRange(0.0, 4.0, 1),
    "reg_lambda": FloatRange(0.0, 4.0, 1),
    "gamma": FloatRange(0.0, 0.5, 1),
}
# wider space used when image embeddings are appended to the table
FEATUREFUSE_SPACE = {
    **GBT_SPACE,
    "max_depth": IntRange(3, 8),
    "min_child_weight": IntRange(2, 14),
    "subsample": FloatRange(0.6, 1.0, 2),
    "colsample_bytree": FloatRange(0.6, 1.0, 2),
    "learning_rate": FloatRange(0.01, 0.3, 2),
}
RF_SPACE = {
    "n_estimators": IntRange(100, 1000),
    "max_depth": IntRange(5, 50),
    "min_samples_split": IntRange(2, 20),
    "min_samples_leaf": IntRange(1, 10),
}


def space_from_config(d):
    """``{"name": [low, high]}`` for integers or ``[low, high, decimals]`` for floats."""
    out = {}
    for name, spec in d.items():
        out[name] = IntRange(int(spec[0]), int(spec[1])) if len(spec) == 2 else FloatRange(
            float(spec[0]), float(spec[1]), int(spec[2])
        )
    return out


def space_to_config(space):
    return {
        k: [r.low, r.high] if isinstance(r, IntRange) else [r.low, r.high, r.decimals]
        for k, r in space.items()
    }


def sample_candidates(space, n, seed):
    """``n`` parameter dicts drawn uniformly (with rounding) from ``space``."""
    rng = np.random.default_rng(seed)
    names = list(space)
    return [{k: space[k].sample(rng) for k in names} for _ in range(n)]


@dataclass
class SearchResult:
    candidates: list
    val_scores: np.ndarray
    test_scores: np.ndarray | None = None
    chosen: int = field(default=-1)

    def ranking(self):
        """Candidate indices best first: validation score, then smaller max_depth, then index."""
        return sorted(
            range(len(self.candidates)),
            key=lambda i: (-self.val_scores[i], self.candidates[i].get("max_depth", 0), i),
        )

    def write_csv(self, path):
        names = list(self.candidates[0]) if self.candidates else []
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index"] + names + ["val_score", "test_score", "chosen"])
            for i, cand in enumerate(self.candidates):
                test = "" if self.test_scores is None or np.isnan(self.test_scores[i]) else repr(
                    float(self.test_scores[i])
                )
                w.writerow([i] + [cand[k] for k in names] + [repr(float(self.val_scores[i])), test,
                                                             int(i == self.chosen)])

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        candidates, val, test, chosen = [], [], [], -1
        for row in rows:
            cand = {}
            for k, v in row.items():
                if k in ("index", "val_score", "test_score", "chosen"):
                    continue
                cand[k] = int(v) if v.lstrip("-").isdigit() else float(v)
            candidates.append(cand)
            val.append(float(row["val_score"]))
            test.append(float(row["test_score"]) if row["test_score"] else np.nan)
            if row["chosen"] == "1":
                chosen = int(row["index"])
        return cls(candidates, np.array(val), np.array(test), chosen)


def accuracy(y_true, y_pred):
    return float(np.mean(np.asarray(y_true) == np.asarray(y_pred)))


def gbt_factory(base: GbtParams = GbtParams()):
    def fit(params, X, y):
        merged = {**{k: getattr(base, k) for k in GbtParams.__dataclass_fields__}, **params}
        return fit_gbt(X, y, GbtParams.from_dict(merged))

    return fit


def rf_factory(seed=0):
    def fit(params, X, y):
        return fit_random_forest(X, y, dict(params, random_state=seed))

    return fit


def random_search(space, X_train, y_train, X_val, y_val, n=1000, seed=0,
                  fit: Callable | None = None, threshold=0.5) -> SearchResult:
    """Sample ``n`` candidates, fit each on the training split, score accuracy on validation."""
    fit = gbt_factory() if fit is None else fit
    candidates = sample_candidates(space, n, seed)
    scores = np.empty(len(candidates))
    for i, params in enumerate(candidates):
        model = fit(params, X_train, y_train)
        pred = (model.predict_proba(X_val)[:, 1] >= threshold).astype(int)
        scores[i] = accuracy(y_val, pred)
    result = SearchResult(candidates, scores)
    result.chosen = select_model(result)
    return result


def select_model(result: SearchResult) -> int:
    """Index of the best validation score; ties go to smaller max_depth, then lower index."""
    if not result.candidates:
        raise ValueError("empty search result")
    return result.ranking()[0]
