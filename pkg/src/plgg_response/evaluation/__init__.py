"""Ensembling, fold plans, metrics and the cross-validation driver."""
from .cv import CohortData, CvConfig, build_report, run_cv, topk_average, train_folds
from .ensemble import EnsemblePredictor, decide, ensemble_prob
from .folds import Fold, FoldPlan, check_no_leakage, make_folds
from .metrics import MetricsReport, compute_metrics, roc_auc, summarize_folds

__all__ = [
    "CohortData",
    "CvConfig",
    "EnsemblePredictor",
    "Fold",
    "FoldPlan",
    "MetricsReport",
    "build_report",
    "check_no_leakage",
    "compute_metrics",
    "decide",
    "ensemble_prob",
    "make_folds",
    "roc_auc",
    "run_cv",
    "summarize_folds",
    "topk_average",
    "train_folds",
]
