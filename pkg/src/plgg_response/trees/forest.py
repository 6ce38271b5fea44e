"""Random-forest baseline (bagged gini CART trees)."""
from __future__ import annotations

import numpy as np
from sklearn.ensemble import RandomForestClassifier

from ..exceptions import DegenerateLabelsError

RF_DEFAULTS = {
    "n_estimators": 100,
    "max_depth": None,
    "min_samples_split": 2,
    "min_samples_leaf": 1,
    "random_state": 0,
}


def fit_random_forest(X, y, rf_params=None) -> RandomForestClassifier:
    """Bootstrap-aggregated gini trees; probabilities are the mean over trees."""
    params = {**RF_DEFAULTS, **(rf_params or {})}
    y = np.asarray(y)
    if np.unique(y).size < 2:
        raise DegenerateLabelsError("both classes must be present")
    model = RandomForestClassifier(
        n_estimators=int(params["n_estimators"]),
        max_depth=None if params["max_depth"] is None else int(params["max_depth"]),
        min_samples_split=int(params["min_samples_split"]),
        min_samples_leaf=int(params["min_samples_leaf"]),
        criterion="gini",
        bootstrap=True,
        random_state=int(params["random_state"]),
        n_jobs=1,
    )
    return model.fit(np.asarray(X, dtype=np.float64), y)


def oob_rows(model: RandomForestClassifier, n_rows: int):
    """Per tree, the row indices left out of its bootstrap sample."""
    out = []
    for sample in model.estimators_samples_:
        mask = np.ones(n_rows, dtype=bool)
        mask[sample] = False
        out.append(np.flatnonzero(mask))
    return out
