import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plgg_response.cohort import (
    CLINICAL_FEATURES,
    CSV_COLUMNS,
    EXCLUDED,
    Branch,
    ClinicalRecord,
    cohort_summary,
    derive_outcome,
    load_cohort,
    outcome_branch,
    write_cohort,
)
from plgg_response.exceptions import ParseError, SchemaError


def rec(**kw):
    return ClinicalRecord(case_id=kw.pop("case_id", "c"), **kw)


@pytest.mark.parametrize(
    "kw, expected",
    [
        (dict(deceased_due_to_illness=True, t_efs=100, t_chemo_start=50), 0),
        (dict(deceased_due_to_illness=True), 0),
        (dict(t_efs=None), 1),
        (dict(t_efs=500, t_chemo_start=600, t_chemo_end=900), 1),
        (dict(t_efs=500, t_chemo_start=600, t_chemo_end=900, has_subsequent_efs=True), 0),
        (dict(t_efs=700, t_chemo_start=600, t_chemo_end=800), 0),
        (dict(t_efs=900, t_chemo_end=800), 0),
        (dict(t_efs=500), EXCLUDED),
        (dict(t_efs=500, t_chemo_end=800), EXCLUDED),
        (dict(t_efs=500, t_chemo_start=600), 1),
        (dict(t_efs=700, t_chemo_start=600), EXCLUDED),
        (dict(t_efs=600, t_chemo_start=600, t_chemo_end=800), 0),
        (dict(t_efs=800, t_chemo_start=600, t_chemo_end=800), 0),
    ],
)
def test_outcome_rule(kw, expected):
    assert derive_outcome(rec(**kw)) == expected


def _oracle(deceased, efs, start, end, subsequent):
    # literal transcription of the ordered rule with boundary days as "during"
    if deceased:
        return 0
    if efs is None:
        return 1
    if start is not None and efs < start:
        return 0 if subsequent else 1
    if start is not None and end is not None and start <= efs <= end:
        return 0
    if end is not None and efs > end:
        return 0
    return EXCLUDED


days = st.one_of(st.none(), st.integers(0, 50))


@settings(max_examples=400, deadline=None)
@given(st.booleans(), days, days, days, st.booleans())
def test_outcome_matches_oracle(deceased, efs, start, end, subsequent):
    if start is not None and end is not None and start > end:
        start, end = end, start
    r = rec(deceased_due_to_illness=deceased, t_efs=efs, t_chemo_start=start, t_chemo_end=end,
            has_subsequent_efs=subsequent)
    assert derive_outcome(r) == _oracle(deceased, efs, start, end, subsequent)
    assert (outcome_branch(r) is Branch.EXCLUDED) == (derive_outcome(r) is EXCLUDED)


def test_start_after_end_rejected():
    with pytest.raises(ValueError):
        rec(t_chemo_start=10, t_chemo_end=5)


def test_summary_counts_and_empty():
    assert cohort_summary([])["labeled"] == 0
    one = cohort_summary([rec(t_efs=5)])
    assert one["excluded"] == 1 and one["labeled"] == 0


def test_summary_permutation_invariant():
    records = [rec(case_id=str(i), t_efs=t, t_chemo_start=s, t_chemo_end=e)
               for i, (t, s, e) in enumerate([(None, 1, 2), (5, 1, 9), (0, 3, 4), (7, None, 3)])]
    ref = cohort_summary(records)
    for perm in itertools.permutations(records):
        assert cohort_summary(perm) == ref


def _write_rows(path, header, rows):
    path.write_text(",".join(header) + "\n" + "".join(",".join(r) + "\n" for r in rows))


def _row(case_id, **over):
    base = {c: "x" for c in CSV_COLUMNS}
    base.update(case_id=case_id, age_at_event_days="2973", t_chemo_start="100", t_chemo_end="200",
                t_efs="NA", has_subsequent_efs="", deceased_due_to_illness="0")
    base.update(over)
    return [base[c] for c in CSV_COLUMNS]


def test_load_well_formed(tmp_path):
    p = tmp_path / "c.csv"
    _write_rows(p, CSV_COLUMNS, [_row("a"), _row("b", t_efs=""), _row("c", t_efs="150")])
    records = load_cohort(p)
    assert [r.case_id for r in records] == ["a", "b", "c"]
    assert records[0].t_efs is None and records[1].t_efs is None and records[2].t_efs == 150
    assert records[0].age_at_event_days == 2973


def test_load_missing_column(tmp_path):
    p = tmp_path / "c.csv"
    header = [c for c in CSV_COLUMNS if c != "age_at_event_days"]
    _write_rows(p, header, [])
    with pytest.raises(SchemaError):
        load_cohort(p)


def test_load_non_integer_day_reports_row(tmp_path):
    p = tmp_path / "c.csv"
    _write_rows(p, CSV_COLUMNS, [_row("a"), _row("b", t_chemo_start="12.5")])
    with pytest.raises(ParseError) as err:
        load_cohort(p)
    assert err.value.row == 1


def test_write_load_roundtrip(tmp_path):
    records = [rec(case_id="a", legal_sex="Male", age_at_event_days=12, t_efs=None, t_chemo_start=3),
               rec(case_id="b", race="Asian", t_efs=4, has_subsequent_efs=True, deceased_due_to_illness=True)]
    write_cohort(records, tmp_path / "c.csv")
    assert load_cohort(tmp_path / "c.csv") == records


def test_clinical_values_exclude_timing():
    r = rec(age_at_event_days=5, t_efs=3)
    assert len(r.clinical_values()) == len(CLINICAL_FEATURES) == 12
    assert not set(CLINICAL_FEATURES) & {"t_efs", "t_chemo_start", "t_chemo_end"}
