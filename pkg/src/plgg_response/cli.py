"""plgg-response command-line interface.

Commands share one JSON config (``--config``). Exit codes: 0 ok, 2 config
error, 3 data error, 4 degenerate cohort.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import artifacts
from .cohort import EXCLUDED, cohort_summary, derive_outcome, load_cohort, records_by_id
from .config import RunConfig
from .evaluation.cv import CohortData, CvConfig, build_report, report_json, train_folds, write_roc_csv
from .evaluation.ensemble import ensemble_prob
from .exceptions import (
    ConfigError,
    DataError,
    DegenerateError,
    IoError,
    MissingProbError,
    NotFoundError,
    PlggError,
)
from .fusion import fuse
from .image_branch import load_external_probs
from .pipeline import prepare_case
from .radiomics import RadiomicsConfig
from .segmentation import SubregionMasks
from .synthetic import MASK_NAMES, SynthConfig, generate_cohort, write_cohort_files
from .trees.gbt import GbtParams
from .volume_io import SEQUENCES, CaseBundle, read_nifti

EXIT_CONFIG, EXIT_DATA, EXIT_DEGENERATE = 2, 3, 4


def _find(directory: Path, case_id, name):
    for ext in (".nii.gz", ".nii"):
        p = directory / f"{case_id}_{name}{ext}"
        if p.exists():
            return p
    raise IoError(f"missing {case_id}_{name}.nii[.gz] in {directory}")


def load_case(image_dir, mask_dir, case_id):
    sequences = {s: read_nifti(_find(Path(image_dir), case_id, s)) for s in SEQUENCES}
    masks = {m: read_nifti(_find(Path(mask_dir), case_id, m), is_mask=True) for m in MASK_NAMES}
    bundle = CaseBundle(case_id, sequences, masks)
    return bundle, SubregionMasks(masks["ET"], masks["CC"], masks["ED"], masks["WT"])


def _extract_one(args):
    image_dir, mask_dir, case_id, rcfg = args
    try:
        bundle, masks = load_case(image_dir, mask_dir, case_id)
        return prepare_case(bundle, masks, rcfg), None
    except (DataError, IoError) as exc:
        return None, (case_id, f"{type(exc).__name__}: {exc}")


def _map(fn, jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _cv_config(cfg: RunConfig) -> CvConfig:
    t = cfg.tree
    seed = int(t["seed"])
    train = dict(t["train"], random_state=seed)
    return CvConfig(
        n_folds=int(t["folds"]["k"]),
        fold_seed=seed,
        val_fraction=float(t["folds"]["val_fraction"]),
        n_candidates=int(t["search"]["n_candidates"]),
        search_seed=seed,
        tabular_model=t["search"]["tabular_model"],
        featurefuse=bool(t["search"]["featurefuse"]),
        space=cfg.search_space(),
        gbt_base=GbtParams(n_rounds=int(t["gbt"]["n_rounds"]), base_score=float(t["gbt"]["base_score"]),
                           seed=seed),
        image_branch=t["branch"],
        image_train=train,
        topk=int(t["topk"]),
        threshold=float(t["threshold"]),
    )


# ------------------------------------------------------------------ commands


def cmd_synth(cfg: RunConfig, args):
    s = cfg["synth"]
    scfg = SynthConfig(int(s["n_cases"]), tuple(s["grid"]), float(s["effect"]), float(s["class_balance"]),
                       int(cfg["seed"]))
    cases = generate_cohort(scfg)
    write_cohort_files(cases, cfg.path("cohort_csv"), cfg.path("image_dir"), cfg.path("mask_dir"))
    print(json.dumps({"cases": len(cases), "cohort_csv": str(cfg.path("cohort_csv"))}))


def cmd_extract(cfg: RunConfig, args):
    cfg.require("cohort_csv", "image_dir", "mask_dir")
    records = load_cohort(cfg.path("cohort_csv"))
    rcfg = RadiomicsConfig(bin_width=float(cfg["radiomics"]["bin_width"]),
                           gldm_alpha=float(cfg["radiomics"]["gldm_alpha"]))
    jobs = [(str(cfg.path("image_dir")), str(cfg.path("mask_dir")), r.case_id, rcfg) for r in records]
    results = _map(_extract_one, jobs, args.workers)
    prepared = [p for p, _ in results if p is not None]
    skipped = [s for _, s in results if s is not None]
    artifacts.write_extraction(cfg.path("output_dir"), prepared, skipped)
    print(json.dumps({"extracted": len(prepared), "skipped": len(skipped)}))


def _cohort_data(cfg: RunConfig):
    cfg.require("cohort_csv")
    records = load_cohort(cfg.path("cohort_csv"))
    radiomics, embeddings = artifacts.read_extraction(cfg.path("output_dir"))
    external = None
    if cfg["branch"] == "external":
        cfg.require("external_probs")
        external = load_external_probs(cfg.external_probs_path)
    return CohortData(records, radiomics, embeddings, external)


def cmd_train(cfg: RunConfig, args):
    data = _cohort_data(cfg)
    ccfg = _cv_config(cfg)
    plan, outcomes = train_folds(data, ccfg, args.workers)
    models_dir = cfg.path("output_dir") / artifacts.MODELS_DIR
    models_dir.mkdir(parents=True, exist_ok=True)
    (models_dir / "folds.json").write_text(json.dumps(plan.to_dict(), indent=1, sort_keys=True))
    for o in outcomes:
        artifacts.save_fold(o, models_dir)
    print(json.dumps({"folds": len(outcomes), "candidates_per_fold": ccfg.n_candidates}))


def cmd_evaluate(cfg: RunConfig, args):
    outcomes = artifacts.load_folds(cfg.path("output_dir") / artifacts.MODELS_DIR)
    report = build_report(outcomes, _cv_config(cfg))
    out = cfg.path("output_dir")
    artifacts.write_text(out / "report.json", report_json(report))
    write_roc_csv(report, out / "roc.csv")
    with open(out / "shap_ranking.csv", "w") as fh:
        fh.write("feature,mean_abs_shap,std\n")
        for r in report["shap_ranking"]:
            fh.write(f"{r['feature']},{r['mean_abs_shap']!r},{r['std']!r}\n")
    print(json.dumps({"auc": report["auc"], "accuracy": report["pooled"]["ensemble"]["accuracy"]}))


def cmd_predict(cfg: RunConfig, args):
    """Out-of-fold prediction: the case is scored by the fold that held it out."""
    if not args.case:
        raise ConfigError("predict: --case is required")
    records = records_by_id(load_cohort(cfg.path("cohort_csv")))
    if args.case not in records:
        raise NotFoundError(f"unknown case id {args.case!r}")
    outcomes = artifacts.load_folds(cfg.path("output_dir") / artifacts.MODELS_DIR)
    fold = next((o for o in outcomes if args.case in o.fold.test), None)
    if fold is None:
        raise NotFoundError(f"case {args.case!r} is not in any fold's test set")
    radiomics, embeddings = artifacts.read_extraction(cfg.path("output_dir"))
    if args.case not in radiomics:
        raise NotFoundError(f"no extracted features for case {args.case!r}")
    row = fuse(radiomics[args.case], fold.encoder.encode(records[args.case])).values
    if len(fold.columns) > row.size:
        row = np.concatenate([row, embeddings[args.case]])
    h = float(fold.tabular.predict_proba(row[None, :])[0, 1])
    if cfg["branch"] == "external":
        cfg.require("external_probs")
        f = float(load_external_probs(cfg.external_probs_path).get(args.case, np.nan))
        if np.isnan(f):
            raise MissingProbError(f"no external probability for case {args.case!r}")
    elif hasattr(fold.image_model, "coef_"):
        if args.case not in embeddings:
            raise NotFoundError(f"no image embedding for case {args.case!r}")
        f = float(fold.image_model.predict_proba(embeddings[args.case][None, :])[0, 1])
    else:
        f = fold.image_model.prob(args.case)
    label = derive_outcome(records[args.case])
    print(json.dumps({
        "case_id": args.case,
        "fold": fold.index,
        "image_prob": f,
        "tabular_prob": h,
        "ensemble_prob": ensemble_prob(f, h),
        "label": None if label is EXCLUDED else int(label),
    }, sort_keys=True))


def cmd_label_audit(cfg: RunConfig, args):
    cfg.require("cohort_csv")
    print(json.dumps(cohort_summary(load_cohort(cfg.path("cohort_csv"))), indent=1))


COMMANDS = {
    "synth": cmd_synth,
    "extract": cmd_extract,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "label-audit": cmd_label_audit,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="plgg-response", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--seed", type=int, help="overrides the config seed")
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--branch", choices=("baseline", "external"))
    parser.add_argument("--external-probs", help="CSV of case_id,prob for the external image branch")
    parser.add_argument("--case", help="case id for predict")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.external_probs is not None:
            overrides["external_probs"] = str(Path(args.external_probs).resolve())
        if args.branch is not None:
            overrides["branch"] = args.branch
        if overrides:
            cfg = cfg.override(**overrides)
        args.workers = max(1, int(args.workers))
        COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DegenerateError as exc:
        print(f"degenerate cohort: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (DataError, IoError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PlggError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
