"""Cross-validated training and evaluation of the image + tabular ensemble.

Per fold: the clinical encoder is fit on the training cases only, the tabular
model is chosen by random search scored on the validation cases, the image
branch keeps the epoch with the best validation accuracy, and both branches
are averaged on the held-out test cases. Fold reports are reduced in fold
order, so parallel execution gives the same report as a serial run.
"""
from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..cohort import derive_outcome, EXCLUDED
from ..exceptions import FoldDegenerateError, NotFoundError
from ..fusion import TABLE_COLUMNS, ClinicalEncoder, embedding_names, fuse
from ..image_branch import EMBEDDING_DIM, ExternalProbabilities, ImageBranchClassifier
from ..trees.gbt import GbtParams, GradientBoostedTreesClassifier
from ..trees.search import (
    FEATUREFUSE_SPACE,
    GBT_SPACE,
    RF_SPACE,
    SearchResult,
    accuracy,
    gbt_factory,
    random_search,
    rf_factory,
)
from ..trees.shap import mean_abs_shap
from .ensemble import decide, ensemble_prob
from .folds import Fold, check_no_leakage, make_folds
from .metrics import compute_metrics, summarize_folds


@dataclass
class CohortData:
    """Model inputs keyed by case id.

    ``embeddings`` (4096-dim pooled images) feed the built-in image branch;
    ``external_probs`` replaces it with precomputed probabilities.
    """

    records: list
    radiomics: dict
    embeddings: dict = field(default_factory=dict)
    external_probs: dict | None = None

    def labeled_ids(self):
        ids = []
        for rec in self.records:
            if derive_outcome(rec) is not EXCLUDED and rec.case_id in self.radiomics:
                ids.append(rec.case_id)
        return ids


@dataclass
class CvConfig:
    n_folds: int = 5
    fold_seed: int = 0
    val_fraction: float = 0.1
    n_candidates: int = 1000
    search_seed: int = 0
    tabular_model: str = "gbt"  # or "rf"
    featurefuse: bool = False
    space: dict | None = None
    gbt_base: GbtParams = GbtParams(n_rounds=100, base_score=0.5)
    image_branch: str = "baseline"  # or "external"
    image_train: dict = field(default_factory=dict)
    topk: int = 10
    threshold: float = 0.5

    def search_space(self):
        if self.space is not None:
            return self.space
        if self.tabular_model == "rf":
            return RF_SPACE
        return FEATUREFUSE_SPACE if self.featurefuse else GBT_SPACE


@dataclass
class FoldOutcome:
    index: int
    fold: Fold
    encoder: ClinicalEncoder
    search: SearchResult
    tabular: object
    image_model: object
    columns: tuple
    X_test: np.ndarray
    y_test: np.ndarray
    p_img: np.ndarray
    p_tab: np.ndarray
    topk_test: list


def topk_average(search_log: SearchResult, test_scores=None, k=10):
    """Mean and population std of test accuracy over the ``k`` best-validation candidates."""
    scores = search_log.test_scores if test_scores is None else np.asarray(test_scores)
    top = search_log.ranking()[: max(1, int(k))]
    vals = np.array([scores[i] for i in top], dtype=np.float64)
    return {"k": len(top), "mean": float(vals.mean()), "std": float(vals.std()), "indices": top}


def _rows(data: CohortData, ids, encoder, with_embedding):
    by_id = {r.case_id: r for r in data.records}
    X, y = [], []
    for cid in ids:
        rec = by_id[cid]
        row = fuse(data.radiomics[cid], encoder.encode(rec), cid).values
        if with_embedding:
            row = np.concatenate([row, np.asarray(data.embeddings[cid], dtype=np.float64)])
        X.append(row)
        y.append(int(derive_outcome(rec)))
    return np.vstack(X), np.array(y)


def _image_inputs(data, ids):
    try:
        return np.vstack([np.asarray(data.embeddings[c], dtype=np.float64) for c in ids])
    except KeyError as e:
        raise NotFoundError(f"no image embedding for case {e.args[0]!r}") from None


def run_fold(data: CohortData, fold: Fold, index: int, cfg: CvConfig) -> FoldOutcome:
    by_id = {r.case_id: r for r in data.records}
    encoder = ClinicalEncoder().fit([by_id[c] for c in fold.train])
    X_tr, y_tr = _rows(data, fold.train, encoder, cfg.featurefuse)
    X_va, y_va = _rows(data, fold.val, encoder, cfg.featurefuse)
    X_te, y_te = _rows(data, fold.test, encoder, cfg.featurefuse)
    if np.unique(y_tr).size < 2:
        raise FoldDegenerateError(f"fold {index}: training split has a single class")
    columns = TABLE_COLUMNS + (embedding_names(EMBEDDING_DIM) if cfg.featurefuse else ())

    if cfg.tabular_model == "rf":
        fit = rf_factory(cfg.search_seed)
    else:
        fit = gbt_factory(cfg.gbt_base)
    search = random_search(
        cfg.search_space(), X_tr, y_tr, X_va, y_va, n=cfg.n_candidates,
        seed=[cfg.search_seed, index], fit=fit, threshold=cfg.threshold,
    )
    ranking = search.ranking()
    test_scores = np.full(len(search.candidates), np.nan)
    tabular = None
    for i in ranking[: max(1, cfg.topk)]:
        model = fit(search.candidates[i], X_tr, y_tr)
        if i == search.chosen:
            tabular = model
        test_scores[i] = accuracy(y_te, (model.predict_proba(X_te)[:, 1] >= cfg.threshold).astype(int))
    search.test_scores = test_scores
    if isinstance(tabular, GradientBoostedTreesClassifier):
        tabular.feature_names_ = list(columns)
    p_tab = tabular.predict_proba(X_te)[:, 1]

    if cfg.image_branch == "external":
        image_model = ExternalProbabilities(data.external_probs or {})
        p_img = image_model.probs_for(fold.test)
    else:
        image_model = ImageBranchClassifier(**cfg.image_train).fit(
            _image_inputs(data, fold.train), y_tr, _image_inputs(data, fold.val), y_va
        )
        p_img = image_model.predict_proba(_image_inputs(data, fold.test))[:, 1]

    # every structure fit or scored during training must be free of test ids
    check_no_leakage(
        fold,
        encoder_vocabulary=encoder.fit_ids_,
        search_scoring=fold.val,
        epoch_selection=fold.val if cfg.image_branch != "external" else (),
    )
    return FoldOutcome(index, fold, encoder, search, tabular, image_model, columns, X_te, y_te,
                       p_img, p_tab, [float(test_scores[i]) for i in ranking[: max(1, cfg.topk)]])


def _run_fold_args(args):
    return run_fold(*args)


def train_folds(data: CohortData, cfg: CvConfig = CvConfig(), workers=1):
    ids = data.labeled_ids()
    plan = make_folds(ids, cfg.fold_seed, cfg.n_folds, cfg.val_fraction)
    jobs = [(data, fold, i, cfg) for i, fold in enumerate(plan)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_fold_args, jobs))
    else:
        outcomes = [run_fold(*job) for job in jobs]
    return plan, outcomes


def _branch_report(probs, labels, threshold):
    return compute_metrics(decide(probs, threshold), labels, probs)


def build_report(outcomes, cfg: CvConfig = CvConfig()):
    """Report dict: per-fold and pooled metrics, fold mean/std summary, ROC, AUC, SHAP ranking."""
    per_fold, fold_reports = [], []
    ids, labels, f_all, h_all, g_all = [], [], [], [], []
    for o in outcomes:
        g = ensemble_prob(o.p_img, o.p_tab)
        rep = compute_metrics(decide(g, cfg.threshold), o.y_test, g)
        fold_reports.append(rep)
        per_fold.append({
            "fold": o.index,
            "sizes": {"train": len(o.fold.train), "val": len(o.fold.val), "test": len(o.fold.test)},
            "chosen": {"index": o.search.chosen, "params": o.search.candidates[o.search.chosen],
                       "val_accuracy": float(o.search.val_scores[o.search.chosen])},
            "ensemble": rep.as_dict(),
            "image": _branch_report(o.p_img, o.y_test, cfg.threshold).as_dict(),
            "tabular": _branch_report(o.p_tab, o.y_test, cfg.threshold).as_dict(),
            "topk": topk_average(o.search, k=cfg.topk),
        })
        ids.extend(o.fold.test)
        labels.extend(o.y_test.tolist())
        f_all.extend(o.p_img.tolist())
        h_all.extend(o.p_tab.tolist())
        g_all.extend(np.atleast_1d(g).tolist())

    labels = np.array(labels)
    g_all = np.array(g_all)
    pooled = compute_metrics(decide(g_all, cfg.threshold), labels, g_all)
    topk_means = [p["topk"]["mean"] for p in per_fold]
    shap_ranking = []
    if all(isinstance(o.tabular, GradientBoostedTreesClassifier) for o in outcomes):
        shap_ranking = mean_abs_shap([(o.tabular, o.X_test) for o in outcomes], list(outcomes[0].columns))
    return {
        "per_fold": per_fold,
        "pooled": {
            "ensemble": pooled.as_dict(),
            "image": _branch_report(np.array(f_all), labels, cfg.threshold).as_dict(),
            "tabular": _branch_report(np.array(h_all), labels, cfg.threshold).as_dict(),
        },
        "table2_row": summarize_folds(fold_reports),
        "confusion": pooled.confusion.tolist(),
        "roc": [list(p) for p in pooled.roc],
        "auc": pooled.auc,
        "shap_ranking": shap_ranking,
        "topk_average": {"mean": float(np.mean(topk_means)), "std": float(np.std(topk_means))},
        "predictions": [
            {"case_id": c, "label": int(y), "image_prob": f, "tabular_prob": h, "ensemble_prob": float(g)}
            for c, y, f, h, g in zip(ids, labels, f_all, h_all, g_all)
        ],
    }


def run_cv(data: CohortData, cfg: CvConfig = CvConfig(), workers=1):
    """Train all folds and return ``(report, plan, outcomes)``."""
    plan, outcomes = train_folds(data, cfg, workers)
    return build_report(outcomes, cfg), plan, outcomes


def report_json(report) -> str:
    return json.dumps(report, indent=1, sort_keys=True)


def write_roc_csv(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fpr", "tpr", "threshold"])
        for fpr, tpr, thr in report["roc"]:
            w.writerow([repr(fpr), repr(tpr), "" if thr is None else repr(thr)])
