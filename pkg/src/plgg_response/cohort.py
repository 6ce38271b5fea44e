"""Clinical records and the chemotherapy-response outcome label.

The outcome rule, evaluated in order:

1. deceased due to illness                      -> 0 (not effective)
2. no EFS event                                 -> 1 (effective)
3. EFS before chemotherapy start                -> 1, or 0 if later EFS events followed
4. EFS during chemotherapy (start <= EFS <= end) -> 0
5. EFS after chemotherapy end                   -> 0

Boundary days count as "during". A record is excluded when the comparison
that decides it needs a chemotherapy date that was not recorded.
"""
from __future__ import annotations

import csv
import enum
from collections import Counter
from dataclasses import dataclass
from typing import Iterable

from .exceptions import ParseError, SchemaError

CATEGORICAL_COLUMNS = (
    "legal_sex",
    "ethnicity",
    "race",
    "molecular_subtype",
    "tumor_locations",
    "initial_surgery_status",
    "metastatic_status",
    "metastasis_location",
    "chemotherapy_type",
    "protocol_name",
    "chemotherapy_agents",
)
# model-facing clinical columns, in table order
CLINICAL_FEATURES = (
    "legal_sex",
    "ethnicity",
    "race",
    "age_at_event_days",
    "molecular_subtype",
    "tumor_locations",
    "initial_surgery_status",
    "metastatic_status",
    "metastasis_location",
    "chemotherapy_type",
    "protocol_name",
    "chemotherapy_agents",
)
TIMING_COLUMNS = ("t_chemo_start", "t_chemo_end", "t_efs", "has_subsequent_efs", "deceased_due_to_illness")
CSV_COLUMNS = ("case_id",) + CLINICAL_FEATURES + TIMING_COLUMNS

MISSING_TOKENS = {"", "NA", "na", "NaN", "nan", "None"}
_TRUE = {"1", "true", "True", "TRUE", "yes", "Yes", "y"}
_FALSE = {"0", "false", "False", "FALSE", "no", "No", "n"} | MISSING_TOKENS


class Excluded(enum.Enum):
    """Marker for records whose outcome cannot be decided."""

    EXCLUDED = "excluded"

    def __repr__(self):
        return "EXCLUDED"


EXCLUDED = Excluded.EXCLUDED


class Branch(str, enum.Enum):
    DECEASED = "deceased"
    NO_EFS = "no_efs"
    PRE_CHEMO = "pre_chemo_efs"
    DURING_CHEMO = "during_chemo_efs"
    AFTER_CHEMO = "after_chemo_efs"
    EXCLUDED = "excluded"


@dataclass(frozen=True)
class ClinicalRecord:
    case_id: str
    legal_sex: str = ""
    ethnicity: str = ""
    race: str = ""
    age_at_event_days: int = 0
    molecular_subtype: str = ""
    tumor_locations: str = ""
    initial_surgery_status: str = ""
    metastatic_status: str = ""
    metastasis_location: str = ""
    chemotherapy_type: str = ""
    protocol_name: str = ""
    chemotherapy_agents: str = ""
    t_chemo_start: int | None = None
    t_chemo_end: int | None = None
    t_efs: int | None = None
    has_subsequent_efs: bool = False
    deceased_due_to_illness: bool = False

    def __post_init__(self):
        if self.age_at_event_days < 0:
            raise ValueError(f"{self.case_id}: negative age_at_event_days")
        if (
            self.t_chemo_start is not None
            and self.t_chemo_end is not None
            and self.t_chemo_start > self.t_chemo_end
        ):
            raise ValueError(f"{self.case_id}: chemotherapy ends before it starts")

    def clinical_values(self):
        """The 12 model-facing clinical values, in :data:`CLINICAL_FEATURES` order."""
        return tuple(getattr(self, name) for name in CLINICAL_FEATURES)


def outcome_branch(rec: ClinicalRecord) -> Branch:
    if rec.deceased_due_to_illness:
        return Branch.DECEASED
    if rec.t_efs is None:
        return Branch.NO_EFS
    start, end, efs = rec.t_chemo_start, rec.t_chemo_end, rec.t_efs
    if start is None:
        # start <= end, so an event after the end date is decidable without the start
        if end is not None and efs > end:
            return Branch.AFTER_CHEMO
        return Branch.EXCLUDED
    if efs < start:
        return Branch.PRE_CHEMO
    if end is None:
        return Branch.EXCLUDED
    return Branch.DURING_CHEMO if efs <= end else Branch.AFTER_CHEMO


def derive_outcome(rec: ClinicalRecord):
    """Binary response label: 1 effective, 0 not effective, or :data:`EXCLUDED`."""
    branch = outcome_branch(rec)
    if branch is Branch.EXCLUDED:
        return EXCLUDED
    if branch is Branch.NO_EFS:
        return 1
    if branch is Branch.PRE_CHEMO:
        return 0 if rec.has_subsequent_efs else 1
    return 0


def cohort_summary(records: Iterable[ClinicalRecord]) -> dict:
    """Counts per outcome branch and per label."""
    branches = Counter()
    labels = Counter()
    for rec in records:
        branches[outcome_branch(rec).value] += 1
        label = derive_outcome(rec)
        labels["excluded" if label is EXCLUDED else ("effective" if label == 1 else "not_effective")] += 1
    return {
        "n_records": sum(branches.values()),
        "branches": {b.value: branches.get(b.value, 0) for b in Branch},
        "effective": labels.get("effective", 0),
        "not_effective": labels.get("not_effective", 0),
        "excluded": labels.get("excluded", 0),
        "labeled": labels.get("effective", 0) + labels.get("not_effective", 0),
    }


# ------------------------------------------------------------------- CSV I/O


def _parse_day(value, column, row):
    value = value.strip()
    if value in MISSING_TOKENS:
        return None
    try:
        return int(value)
    except ValueError:
        try:
            as_float = float(value)
        except ValueError:
            raise ParseError(f"{column}={value!r} is not an integer day count", row) from None
        if not as_float.is_integer():
            raise ParseError(f"{column}={value!r} is not an integer day count", row) from None
        return int(as_float)


def _parse_bool(value, column, row):
    value = value.strip()
    if value in _TRUE:
        return True
    if value in _FALSE:
        return False
    raise ParseError(f"{column}={value!r} is not a boolean", row)


def load_cohort(csv_path) -> list[ClinicalRecord]:
    """Read clinical records; row indices in errors are 0-based data rows."""
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{csv_path}: missing columns {missing}")
        records = []
        for row_idx, row in enumerate(reader):
            age = _parse_day(row["age_at_event_days"], "age_at_event_days", row_idx)
            if age is None:
                raise ParseError("age_at_event_days is required", row_idx)
            try:
                rec = ClinicalRecord(
                    case_id=row["case_id"].strip(),
                    age_at_event_days=age,
                    t_chemo_start=_parse_day(row["t_chemo_start"], "t_chemo_start", row_idx),
                    t_chemo_end=_parse_day(row["t_chemo_end"], "t_chemo_end", row_idx),
                    t_efs=_parse_day(row["t_efs"], "t_efs", row_idx),
                    has_subsequent_efs=_parse_bool(row["has_subsequent_efs"], "has_subsequent_efs", row_idx),
                    deceased_due_to_illness=_parse_bool(
                        row["deceased_due_to_illness"], "deceased_due_to_illness", row_idx
                    ),
                    **{c: row[c].strip() for c in CATEGORICAL_COLUMNS},
                )
            except ValueError as exc:
                raise ParseError(str(exc), row_idx) from None
            records.append(rec)
    return records


def _fmt(value):
    if value is None:
        return "NA"
    if isinstance(value, bool):
        return "1" if value else "0"
    return str(value)


def write_cohort(records: Iterable[ClinicalRecord], csv_path):
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow([_fmt(getattr(rec, c)) for c in CSV_COLUMNS])


def labeled_records(records: Iterable[ClinicalRecord]):
    """``(record, label)`` pairs with excluded records dropped."""
    out = []
    for rec in records:
        label = derive_outcome(rec)
        if label is not EXCLUDED:
            out.append((rec, label))
    return out


def check_unique_ids(records):
    seen = set()
    for rec in records:
        if rec.case_id in seen:
            raise SchemaError(f"duplicate case_id {rec.case_id!r}")
        seen.add(rec.case_id)
    return records


def records_by_id(records):
    return {r.case_id: r for r in check_unique_ids(list(records))}


__all__ = [
    "CATEGORICAL_COLUMNS",
    "CLINICAL_FEATURES",
    "CSV_COLUMNS",
    "EXCLUDED",
    "Branch",
    "ClinicalRecord",
    "cohort_summary",
    "derive_outcome",
    "labeled_records",
    "load_cohort",
    "outcome_branch",
    "write_cohort",
]
