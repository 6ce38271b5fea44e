"""Fused tabular rows: 102 radiomic columns followed by 12 encoded clinical columns."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .cohort import CATEGORICAL_COLUMNS, CLINICAL_FEATURES, EXCLUDED, MISSING_TOKENS, ClinicalRecord
from .exceptions import ShapeError
from .radiomics import FEATURE_NAMES, FeatureVector

TABLE_COLUMNS = FEATURE_NAMES + CLINICAL_FEATURES
MISSING_CODE = -1


class ClinicalEncoder(TransformerMixin, BaseEstimator):
    """Ordinal codes for the 11 categorical clinical columns; age passes through.

    Vocabularies are the sorted distinct non-missing values seen in ``fit``.
    Missing or unseen categories encode as ``-1``. Multi-valued fields are
    treated as one category string.
    """

    def fit(self, records, y=None):
        vocab = {}
        for col in CATEGORICAL_COLUMNS:
            values = {getattr(r, col) for r in records}
            vocab[col] = sorted(v for v in values if v not in MISSING_TOKENS)
        self.vocabulary_ = vocab
        self.fit_ids_ = frozenset(r.case_id for r in records)
        self._index = {c: {v: i for i, v in enumerate(vs)} for c, vs in vocab.items()}
        return self

    def encode(self, rec: ClinicalRecord) -> np.ndarray:
        check_is_fitted(self, "vocabulary_")
        out = np.empty(len(CLINICAL_FEATURES))
        for k, col in enumerate(CLINICAL_FEATURES):
            if col == "age_at_event_days":
                out[k] = float(rec.age_at_event_days)
            else:
                out[k] = self._index[col].get(getattr(rec, col), MISSING_CODE)
        return out

    def transform(self, records):
        return np.vstack([self.encode(r) for r in records]) if len(records) else np.zeros((0, 12))

    def decode(self, column, code):
        code = int(code)
        return None if code == MISSING_CODE else self.vocabulary_[column][code]

    def get_feature_names_out(self, input_features=None):
        return np.array(CLINICAL_FEATURES, dtype=object)

    def to_dict(self):
        return {"vocabulary": self.vocabulary_, "fit_ids": sorted(self.fit_ids_)}

    @classmethod
    def from_dict(cls, d):
        enc = cls()
        enc.vocabulary_ = {k: list(v) for k, v in d["vocabulary"].items()}
        enc.fit_ids_ = frozenset(d.get("fit_ids", ()))
        enc._index = {c: {v: i for i, v in enumerate(vs)} for c, vs in enc.vocabulary_.items()}
        return enc

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)


def encode_clinical(rec: ClinicalRecord, encoder: ClinicalEncoder) -> np.ndarray:
    return encoder.encode(rec)


@dataclass(frozen=True, eq=False)
class FeatureRow:
    case_id: str
    values: np.ndarray
    names: tuple = TABLE_COLUMNS
    label: object = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (len(self.names),):
            raise ShapeError(f"{len(self.names)} columns declared, {values.size} values given")
        if self.label is EXCLUDED:
            raise ValueError(f"{self.case_id}: excluded cases cannot enter the table")
        object.__setattr__(self, "values", values)

    @property
    def radiomics(self):
        return self.values[: len(FEATURE_NAMES)]

    @property
    def clinical(self):
        return self.values[len(FEATURE_NAMES) : len(TABLE_COLUMNS)]


def fuse(radiomics, clinical, case_id="", label=None) -> FeatureRow:
    """Concatenate radiomic then clinical values."""
    rad = radiomics.values if isinstance(radiomics, FeatureVector) else np.asarray(radiomics, dtype=float)
    clin = np.asarray(clinical, dtype=float)
    if rad.shape != (len(FEATURE_NAMES),):
        raise ShapeError(f"expected {len(FEATURE_NAMES)} radiomic values, got {rad.size}")
    if clin.shape != (len(CLINICAL_FEATURES),):
        raise ShapeError(f"expected {len(CLINICAL_FEATURES)} clinical values, got {clin.size}")
    return FeatureRow(case_id, np.concatenate([rad, clin]), TABLE_COLUMNS, label)


def embedding_names(dim):
    return tuple(f"emb_{i}" for i in range(dim))


def fuse_with_embedding(row: FeatureRow, emb) -> FeatureRow:
    """Append an image embedding as columns ``emb_0 .. emb_{d-1}``."""
    emb = np.asarray(emb, dtype=float).ravel()
    return FeatureRow(
        row.case_id,
        np.concatenate([row.values, emb]),
        row.names + embedding_names(emb.size),
        row.label,
    )


def table_arrays(rows):
    """``(X, y, case_ids)`` from a list of fused rows with a common column layout."""
    if not rows:
        return np.zeros((0, len(TABLE_COLUMNS))), np.zeros(0, dtype=int), []
    names = rows[0].names
    if any(r.names != names for r in rows):
        raise ShapeError("rows disagree on column layout")
    X = np.vstack([r.values for r in rows])
    y = np.array([-1 if r.label is None else int(r.label) for r in rows])
    return X, y, [r.case_id for r in rows]


def write_table_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("case_id",) + rows[0].names + ("label",))
        for r in rows:
            w.writerow([r.case_id] + [repr(float(v)) for v in r.values] + ["" if r.label is None else int(r.label)])
