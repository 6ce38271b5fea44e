"""Probability-averaging ensemble of the image and tabular branches."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import RangeError

THRESHOLD = 0.5


def _check_prob(p, name):
    p = np.asarray(p, dtype=np.float64)
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise RangeError(f"{name} probability outside [0, 1]")
    return p


def ensemble_prob(p_img, p_tab):
    """Arithmetic mean of the two branch probabilities (scalars or arrays)."""
    f = _check_prob(p_img, "image")
    h = _check_prob(p_tab, "tabular")
    g = (f + h) / 2
    return float(g) if g.ndim == 0 else g


def decide(g, threshold=THRESHOLD):
    return (np.asarray(g) >= threshold).astype(int)


@dataclass
class EnsemblePredictor:
    """``image`` maps case ids to probabilities; ``tabular`` is a fitted classifier."""

    image: object
    tabular: object
    threshold: float = THRESHOLD

    def branch_probs(self, case_ids, X_tab):
        f = np.asarray(self.image(case_ids), dtype=np.float64)
        h = self.tabular.predict_proba(np.asarray(X_tab, dtype=np.float64))[:, 1]
        return f, h

    def predict_proba(self, case_ids, X_tab):
        f, h = self.branch_probs(case_ids, X_tab)
        return ensemble_prob(f, h)

    def predict(self, case_ids, X_tab):
        return decide(self.predict_proba(case_ids, X_tab), self.threshold)

    def breakdown(self, case_id, x_tab):
        f, h = self.branch_probs([case_id], np.asarray(x_tab)[None, :])
        return {"case_id": case_id, "image_prob": float(f[0]), "tabular_prob": float(h[0]),
                "ensemble_prob": ensemble_prob(f[0], h[0])}
