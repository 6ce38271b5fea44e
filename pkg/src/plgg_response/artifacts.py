"""On-disk layout of extraction outputs and trained fold models."""
from __future__ import annotations

import csv
import json
import pickle
from pathlib import Path

import numpy as np

from .evaluation.cv import FoldOutcome
from .evaluation.folds import Fold
from .exceptions import IoError, NotFoundError, SchemaError
from .fusion import ClinicalEncoder
from .image_branch import ExternalProbabilities, ImageBranchClassifier
from .radiomics import read_features_csv, write_features_csv
from .radiomics.extractor import FeatureVector
from .trees.gbt import GradientBoostedTreesClassifier
from .trees.search import SearchResult

RADIOMICS_CSV = "radiomics.csv"
EMBEDDINGS_NPZ = "embeddings.npz"
SKIPPED_CSV = "skipped.csv"
MODELS_DIR = "models"


def write_extraction(out_dir, prepared, skipped):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_features_csv([(p.case_id, FeatureVector(p.radiomics)) for p in prepared], out / RADIOMICS_CSV)
    ids = np.array([p.case_id for p in prepared])
    emb = np.vstack([p.embedding for p in prepared]) if prepared else np.zeros((0, 0))
    np.savez(out / EMBEDDINGS_NPZ, case_ids=ids, embeddings=emb)
    with open(out / SKIPPED_CSV, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "reason"])
        w.writerows(skipped)


def read_extraction(out_dir):
    """``(radiomics, embeddings)`` dicts keyed by case id."""
    out = Path(out_dir)
    if not (out / RADIOMICS_CSV).exists():
        raise NotFoundError(f"{out / RADIOMICS_CSV} missing; run extract first")
    radiomics = {k: v.values for k, v in read_features_csv(out / RADIOMICS_CSV).items()}
    embeddings = {}
    if (out / EMBEDDINGS_NPZ).exists():
        with np.load(out / EMBEDDINGS_NPZ) as z:
            embeddings = {str(c): e for c, e in zip(z["case_ids"], z["embeddings"])}
    return radiomics, embeddings


def _fold_dir(models_dir, index):
    return Path(models_dir) / f"fold{index}"


def save_fold(o: FoldOutcome, models_dir):
    d = _fold_dir(models_dir, o.index)
    d.mkdir(parents=True, exist_ok=True)
    meta = {
        "index": o.index,
        "train": list(o.fold.train),
        "val": list(o.fold.val),
        "test": list(o.fold.test),
        "columns": list(o.columns),
        "topk_test": o.topk_test,
        "tabular_kind": "gbt" if isinstance(o.tabular, GradientBoostedTreesClassifier) else "rf",
        "image_kind": "external" if isinstance(o.image_model, ExternalProbabilities) else "baseline",
    }
    (d / "fold.json").write_text(json.dumps(meta, indent=1, sort_keys=True))
    o.encoder.save(d / "encoder.json")
    o.search.write_csv(d / "search.csv")
    if meta["tabular_kind"] == "gbt":
        o.tabular.save(d / "tabular.json")
    else:
        with open(d / "tabular.pkl", "wb") as fh:
            pickle.dump(o.tabular, fh, protocol=4)
    if meta["image_kind"] == "baseline":
        o.image_model.save(d / "image.json")
    else:
        (d / "external_probs.json").write_text(json.dumps(o.image_model.probs, indent=1, sort_keys=True))
    np.savez(d / "test.npz", X=o.X_test, y=o.y_test, p_img=o.p_img, p_tab=o.p_tab)


def load_fold(models_dir, index) -> FoldOutcome:
    d = _fold_dir(models_dir, index)
    try:
        meta = json.loads((d / "fold.json").read_text())
    except FileNotFoundError:
        raise NotFoundError(f"no trained fold at {d}; run train first") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{d / 'fold.json'}: {exc}") from None
    encoder = ClinicalEncoder.from_dict(json.loads((d / "encoder.json").read_text()))
    search = SearchResult.read_csv(d / "search.csv")
    if meta["tabular_kind"] == "gbt":
        tabular = GradientBoostedTreesClassifier.load(d / "tabular.json")
    else:
        with open(d / "tabular.pkl", "rb") as fh:
            tabular = pickle.load(fh)
    if meta["image_kind"] == "baseline":
        image_model = ImageBranchClassifier.from_dict(json.loads((d / "image.json").read_text()))
    else:
        image_model = ExternalProbabilities(json.loads((d / "external_probs.json").read_text()))
    with np.load(d / "test.npz") as z:
        X, y, p_img, p_tab = z["X"], z["y"], z["p_img"], z["p_tab"]
    fold = Fold(tuple(meta["train"]), tuple(meta["val"]), tuple(meta["test"]))
    return FoldOutcome(meta["index"], fold, encoder, search, tabular, image_model, tuple(meta["columns"]),
                       X, y, p_img, p_tab, meta["topk_test"])


def load_folds(models_dir):
    models_dir = Path(models_dir)
    if not models_dir.is_dir():
        raise NotFoundError(f"{models_dir} missing; run train first")
    n = len([p for p in models_dir.iterdir() if p.name.startswith("fold") and p.is_dir()])
    if n == 0:
        raise NotFoundError(f"no trained folds under {models_dir}")
    return [load_fold(models_dir, i) for i in range(n)]


def write_text(path, text):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
