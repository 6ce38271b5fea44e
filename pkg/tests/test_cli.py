import json

import pytest

from plgg_response.cli import main


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    cfg = {
        "synth": {"n_cases": 16, "grid": [24, 24, 24], "class_balance": 0.5},
        "search": {"n_candidates": 3},
        "train": {"epochs": 10},
        "topk": 2,
    }
    (d / "config.json").write_text(json.dumps(cfg))
    return d


def run(workdir, *args):
    return main([*args, "--config", str(workdir / "config.json"), "--workers", "1"])


def test_full_chain(workdir, capsys):
    assert run(workdir, "synth") == 0
    assert run(workdir, "label-audit") == 0
    assert run(workdir, "extract") == 0
    assert run(workdir, "train") == 0
    assert run(workdir, "evaluate") == 0
    out = workdir / "run"
    first = (out / "report.json").read_bytes()
    report = json.loads(first)
    assert 0 <= report["auc"] <= 1
    assert (out / "roc.csv").exists() and (out / "shap_ranking.csv").exists()
    assert len(list((out / "models").glob("fold[0-9]*"))) == 5

    capsys.readouterr()
    case = report["predictions"][0]
    assert run(workdir, "predict", "--case", case["case_id"]) == 0
    pred = json.loads(capsys.readouterr().out)
    assert pred["ensemble_prob"] == pytest.approx(case["ensemble_prob"], abs=1e-12)
    assert pred["label"] == case["label"]

    # rerunning train and evaluate reproduces the report byte for byte
    assert run(workdir, "train") == 0 and run(workdir, "evaluate") == 0
    assert (out / "report.json").read_bytes() == first


def test_extract_quarantines_broken_case(workdir):
    victim = workdir / "cohort" / "images" / "SYN0001_T2.nii.gz"
    if not victim.exists():
        pytest.skip("requires the synthetic cohort")
    saved = victim.read_bytes()
    victim.write_bytes(b"garbage")
    try:
        cfg = json.loads((workdir / "config.json").read_text())
        cfg["paths"] = {"output_dir": "run_broken"}
        (workdir / "broken.json").write_text(json.dumps(cfg))
        assert main(["extract", "--config", str(workdir / "broken.json"), "--workers", "1"]) == 0
        skipped = (workdir / "run_broken" / "skipped.csv").read_text()
        assert "SYN0001" in skipped
    finally:
        victim.write_bytes(saved)


def test_exit_codes(workdir, tmp_path):
    assert run(workdir, "predict", "--case", "NOPE") == 3
    assert run(workdir, "predict") == 2
    (tmp_path / "bad.json").write_text(json.dumps({"folds": {"k": 0}}))
    assert main(["train", "--config", str(tmp_path / "bad.json")]) == 2
    (tmp_path / "small.json").write_text(json.dumps({"paths": {"output_dir": str(workdir / "run"),
                                                               "cohort_csv": str(workdir / "cohort/clinical.csv")},
                                                     "folds": {"k": 10}}))
    assert main(["train", "--config", str(tmp_path / "small.json"), "--workers", "1"]) == 4
    assert main(["train", "--config", str(tmp_path / "nothere.json")]) == 2
