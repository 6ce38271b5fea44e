"""Classification metrics: per-class precision/recall/F1, confusion matrix, ROC and AUC."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import EmptyEvalError, ShapeError

SUMMARY_FIELDS = (
    "accuracy",
    "precision_0",
    "recall_0",
    "f1_0",
    "precision_1",
    "recall_1",
    "f1_1",
    "macro_precision",
    "macro_recall",
    "macro_f1",
)


def _ratio(num, den):
    return float(num) / float(den) if den else 0.0


@dataclass
class MetricsReport:
    confusion: np.ndarray  # rows true class {0, 1}, columns predicted
    roc: list = field(default_factory=list)
    auc: float | None = None

    @property
    def n(self):
        return int(self.confusion.sum())

    @property
    def accuracy(self):
        return _ratio(np.trace(self.confusion), self.confusion.sum())

    def precision(self, c):
        return _ratio(self.confusion[c, c], self.confusion[:, c].sum())

    def recall(self, c):
        return _ratio(self.confusion[c, c], self.confusion[c, :].sum())

    def f1(self, c):
        p, r = self.precision(c), self.recall(c)
        return 2 * p * r / (p + r) if p + r else 0.0

    def as_dict(self):
        d = {"accuracy": self.accuracy}
        for c in (0, 1):
            d[f"precision_{c}"] = self.precision(c)
            d[f"recall_{c}"] = self.recall(c)
            d[f"f1_{c}"] = self.f1(c)
        d["macro_precision"] = (d["precision_0"] + d["precision_1"]) / 2
        d["macro_recall"] = (d["recall_0"] + d["recall_1"]) / 2
        d["macro_f1"] = (d["f1_0"] + d["f1_1"]) / 2
        d["n"] = self.n
        d["confusion"] = self.confusion.tolist()
        if self.auc is not None:
            d["auc"] = self.auc
        return d


def confusion_matrix(preds, labels):
    preds = np.asarray(preds, dtype=int)
    labels = np.asarray(labels, dtype=int)
    cm = np.zeros((2, 2), dtype=np.int64)
    np.add.at(cm, (labels, preds), 1)
    return cm


def compute_metrics(preds, labels, scores=None) -> MetricsReport:
    """Metrics from hard predictions; ``scores`` (optional) adds ROC points and AUC."""
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape:
        raise ShapeError(f"{preds.size} predictions for {labels.size} labels")
    if preds.size == 0:
        raise EmptyEvalError("no cases to evaluate")
    report = MetricsReport(confusion_matrix(preds, labels))
    if scores is not None and len(np.unique(labels)) == 2:
        report.roc, report.auc = roc_auc(scores, labels)
    return report


def from_confusion(cm) -> MetricsReport:
    cm = np.asarray(cm, dtype=np.int64)
    if cm.sum() == 0:
        raise EmptyEvalError("empty confusion matrix")
    return MetricsReport(cm)


def roc_auc(scores, labels):
    """ROC points ``(fpr, tpr, threshold)`` and AUC = P(pos > neg) + P(tie)/2."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=int)
    if s.size == 0:
        raise EmptyEvalError("no scores")
    pos, neg = s[y == 1], s[y == 0]
    if pos.size == 0 or neg.size == 0:
        raise ShapeError("AUC needs both classes")
    # pairwise comparison via ranks of the pooled sample
    order = np.sort(neg)
    below = np.searchsorted(order, pos, side="left")
    not_above = np.searchsorted(order, pos, side="right")
    auc = float((below.sum() + 0.5 * (not_above - below).sum()) / (pos.size * neg.size))

    points = [(0.0, 0.0, None)]
    for t in np.unique(s)[::-1]:
        points.append((float(np.mean(neg >= t)), float(np.mean(pos >= t)), float(t)))
    return points, auc


def summarize_folds(reports):
    """Mean and population std across folds for each summary field."""
    out = {}
    for name in SUMMARY_FIELDS:
        vals = np.array([r.as_dict()[name] for r in reports])
        out[name] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return out
