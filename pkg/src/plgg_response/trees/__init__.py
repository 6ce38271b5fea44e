"""Tabular classifiers: boosted trees, random-forest baseline, search and TreeSHAP."""
from .forest import fit_random_forest
from .gbt import GbtParams, GradientBoostedTreesClassifier, fit_gbt, predict_prob
from .search import (
    FEATUREFUSE_SPACE,
    GBT_SPACE,
    RF_SPACE,
    FloatRange,
    IntRange,
    SearchResult,
    random_search,
    sample_candidates,
    select_model,
)
from .shap import ShapVector, mean_abs_shap, shap_values

__all__ = [
    "FEATUREFUSE_SPACE",
    "GBT_SPACE",
    "RF_SPACE",
    "FloatRange",
    "GbtParams",
    "GradientBoostedTreesClassifier",
    "IntRange",
    "SearchResult",
    "ShapVector",
    "fit_gbt",
    "fit_random_forest",
    "mean_abs_shap",
    "predict_prob",
    "random_search",
    "sample_candidates",
    "select_model",
    "shap_values",
]
