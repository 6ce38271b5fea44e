from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ..volume_io import check_congruent
from .discretize import RadiomicsConfig, discretize
from .firstorder import FIRSTORDER_NAMES, firstorder_features
from .shape import SHAPE_NAMES, shape_features
from .texture import (
    GLCM_NAMES,
    GLDM_NAMES,
    GLRLM_NAMES,
    GLSZM_NAMES,
    glcm_features,
    gldm_features,
    glrlm_features,
    glszm_features,
)

FAMILIES = (
    ("shape", SHAPE_NAMES),
    ("firstorder", FIRSTORDER_NAMES),
    ("glcm", GLCM_NAMES),
    ("glrlm", GLRLM_NAMES),
    ("glszm", GLSZM_NAMES),
    ("gldm", GLDM_NAMES),
)
FEATURE_NAMES = tuple(f"{family}_{name}" for family, names in FAMILIES for name in names)
N_FEATURES = len(FEATURE_NAMES)
assert N_FEATURES == 102


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    names: tuple = FEATURE_NAMES

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (len(self.names),):
            raise ValueError(f"expected {len(self.names)} values, got shape {values.shape}")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __getitem__(self, name):
        return float(self.values[self.names.index(name)])

    def __len__(self):
        return len(self.values)

    def as_dict(self):
        return dict(zip(self.names, self.values.tolist()))


def extract_features(t2, wt, cfg: RadiomicsConfig = RadiomicsConfig()) -> FeatureVector:
    """All 102 radiomic features of ``t2`` inside the binary mask ``wt``."""
    check_congruent([t2, wt], what="T2 volume and WT mask")
    roi = discretize(t2, wt, cfg)
    parts = {
        "shape": shape_features(wt),
        "firstorder": firstorder_features(t2, wt, cfg),
        "glcm": glcm_features(roi, cfg),
        "glrlm": glrlm_features(roi, cfg),
        "glszm": glszm_features(roi, cfg),
        "gldm": gldm_features(roi, cfg),
    }
    values = [parts[family][name] for family, names in FAMILIES for name in names]
    return FeatureVector(np.array(values))


class RadiomicsExtractor(TransformerMixin, BaseEstimator):
    """Stateless transformer: ``(t2, wt_mask)`` pairs -> ``(n, 102)`` feature matrix."""

    def __init__(self, bin_width=25.0, gldm_alpha=0.0):
        self.bin_width = bin_width
        self.gldm_alpha = gldm_alpha

    def fit(self, X=None, y=None):
        self.config_ = RadiomicsConfig(bin_width=self.bin_width, gldm_alpha=self.gldm_alpha)
        self.n_features_out_ = N_FEATURES
        return self

    def transform(self, X):
        cfg = RadiomicsConfig(bin_width=self.bin_width, gldm_alpha=self.gldm_alpha)
        return np.vstack([extract_features(t2, wt, cfg).values for t2, wt in X])

    def get_feature_names_out(self, input_features=None):
        return np.array(FEATURE_NAMES, dtype=object)


def write_features_csv(rows, path):
    """``rows``: iterable of ``(case_id, FeatureVector)``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("case_id",) + FEATURE_NAMES)
        for case_id, fv in rows:
            writer.writerow([case_id] + [repr(float(v)) for v in fv.values])


def read_features_csv(path):
    from ..exceptions import SchemaError

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != ("case_id",) + FEATURE_NAMES:
            raise SchemaError(f"{path}: unexpected radiomics header")
        return {row[0]: FeatureVector(np.array([float(v) for v in row[1:]])) for row in reader}
