"""Synthetic cohorts of ellipsoid tumour phantoms with a plantable outcome signal.

Each case gets a rotated ellipsoidal whole tumour whose outer shell is edema,
with small enhancing and cystic cores inside; the rest of the tumour is
non-enhancing. Not-effective cases are drawn with more eccentric tumours and
higher age at event, blended with noise by ``effect`` (0 gives labels that are
independent of every feature).
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from .cohort import ClinicalRecord, write_cohort
from .exceptions import BalanceError, ConfigError
from .segmentation import SubregionMasks
from .volume_io import SEQUENCES, CaseBundle, Volume3D, write_nifti

CATEGORY_CHOICES = {
    "legal_sex": ("Female", "Male"),
    "ethnicity": ("Hispanic or Latino", "Not Hispanic or Latino", "NA"),
    "race": ("White", "Black or African American", "Asian", "Other", "NA"),
    "molecular_subtype": ("KIAA1549-BRAF", "BRAF V600E", "NF1", "Wildtype", "NA"),
    "tumor_locations": ("Cerebellum", "Brainstem", "Suprasellar", "Temporal Lobe", "Optic Pathway"),
    "initial_surgery_status": ("Partial resection", "Gross total resection", "Biopsy only", "Not performed"),
    "metastatic_status": ("No", "Yes"),
    "metastasis_location": ("NA", "Spine", "Leptomeningeal"),
    "chemotherapy_type": ("Protocol based", "Non-protocol", "NA"),
    "protocol_name": ("COG-ACNS0223", "COG-A9952", "SIOP-LGG-2004", "NA"),
    "chemotherapy_agents": ("Carboplatin;Vincristine", "Vinblastine", "Selumetinib", "TPCV"),
}

# per-sequence intensity shift of each subregion over background
_SHIFTS = {
    "T1": {"et": 40.0, "net": -30.0, "cc": -60.0, "ed": -15.0},
    "T1CE": {"et": 160.0, "net": 10.0, "cc": -50.0, "ed": 0.0},
    "T2": {"et": 80.0, "net": 120.0, "cc": 220.0, "ed": 90.0},
    "FLAIR": {"et": 70.0, "net": 100.0, "cc": -20.0, "ed": 140.0},
}
BACKGROUND = 100.0
NOISE = 20.0
MASK_NAMES = ("ET", "CC", "ED", "WT")
AGE_MIN, AGE_SPAN = 129, 6890


@dataclass(frozen=True)
class SynthConfig:
    n_cases: int = 105
    grid: tuple = (48, 48, 48)
    effect: float = 0.8
    class_balance: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if int(self.n_cases) < 4:
            raise ConfigError("n_cases must be >= 4")
        if not 0.0 <= self.effect <= 1.0:
            raise ConfigError("effect must lie in [0, 1]")
        if not 0.0 <= self.class_balance <= 1.0:
            raise ConfigError("class_balance must lie in [0, 1]")
        if len(self.grid) != 3 or min(self.grid) < 16:
            raise ConfigError("grid must be three dims of at least 16 voxels")

    @property
    def n_effective(self):
        return int(round(self.class_balance * self.n_cases))


@dataclass
class SyntheticCase:
    bundle: CaseBundle
    masks: SubregionMasks
    record: ClinicalRecord
    label: int


def _blend(u, label, effect):
    # effect=0 -> pure noise; effect=1 -> half noise, half class indicator
    return (1 - effect) * u + effect * (0.5 * u + 0.5 * (label == 0))


def _ellipsoid(shape, center, radii, rot):
    grid = np.indices(shape, dtype=np.float64).reshape(3, -1).T - center
    local = grid @ rot  # coordinates in the ellipsoid frame
    inside = ((local / radii) ** 2).sum(axis=1) <= 1.0
    return inside.reshape(shape)


def _timing(rng, label, age):
    """(start, end, efs, has_subsequent, deceased) realising ``label``."""
    start = age + int(rng.integers(0, 200))
    end = start + int(rng.integers(300, 700))
    if label == 1:
        if rng.random() < 0.9:
            return start, end, None, False, False
        return start, end, max(0, start - int(rng.integers(1, 200))), False, False
    draw = rng.random()
    if draw < 0.1:
        return start, end, None, False, True
    if draw < 0.6:
        return start, end, int(rng.integers(start, end + 1)), bool(rng.random() < 0.3), False
    return start, end, end + int(rng.integers(1, 1000)), False, False


def make_case(i, label, cfg: SynthConfig):
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, i]))
    shape = tuple(int(g) for g in cfg.grid)
    scale = min(shape) / 48.0

    aspect = 1.0 + 1.2 * _blend(rng.random(), label, cfg.effect)
    r0 = rng.uniform(6.0, 9.0) * scale
    radii = np.array([r0 * aspect**0.75, r0, r0 / aspect**0.25])
    center = np.array(shape) / 2.0 - 0.5 + rng.uniform(-2, 2, 3) * scale
    rot = Rotation.random(random_state=rng).as_matrix()
    wt = _ellipsoid(shape, center, radii, rot)
    core = _ellipsoid(shape, center, 0.8 * radii, rot)
    ed = wt & ~core

    def inner_blob(frac):
        offset = rot @ (rng.uniform(-0.35, 0.35, 3) * radii)
        return _ellipsoid(shape, center + offset, frac * radii, rot) & core

    et = inner_blob(rng.uniform(0.25, 0.4))
    cc = inner_blob(rng.uniform(0.2, 0.35)) & ~et
    net = wt & ~(et | cc | ed)

    sequences = {}
    for seq in SEQUENCES:
        img = BACKGROUND + rng.normal(0.0, NOISE, shape)
        for name, region in (("et", et), ("net", net), ("cc", cc), ("ed", ed)):
            img[region] += _SHIFTS[seq][name]
        sequences[seq] = Volume3D(img.astype(np.float32), (1.0, 1.0, 1.0))

    like = sequences["T2"]
    masks = SubregionMasks.from_arrays(et, cc, ed, wt, like=like)
    case_id = f"SYN{i:04d}"
    age = AGE_MIN + int(round(AGE_SPAN * _blend(rng.random(), label, cfg.effect)))
    clinical = {k: v[int(rng.integers(len(v)))] for k, v in CATEGORY_CHOICES.items()}
    start, end, efs, subsequent, deceased = _timing(rng, label, age)
    record = ClinicalRecord(
        case_id=case_id, age_at_event_days=age, t_chemo_start=start, t_chemo_end=end, t_efs=efs,
        has_subsequent_efs=subsequent, deceased_due_to_illness=deceased, **clinical,
    )
    bundle = CaseBundle(case_id, sequences, {"ET": masks.et, "CC": masks.cc, "ED": masks.ed, "WT": masks.wt})
    return SyntheticCase(bundle, masks, record, label)


def case_labels(cfg: SynthConfig):
    n_eff = cfg.n_effective
    if n_eff <= 0 or n_eff >= cfg.n_cases:
        raise BalanceError(
            f"balance {cfg.class_balance} gives {n_eff} effective of {cfg.n_cases}; both classes are needed"
        )
    labels = np.zeros(cfg.n_cases, dtype=int)
    labels[:n_eff] = 1
    return np.random.default_rng(np.random.SeedSequence([cfg.seed])).permutation(labels)


def generate_cohort(cfg: SynthConfig = SynthConfig()):
    """List of :class:`SyntheticCase`, one per case, in id order."""
    return [make_case(i, int(lab), cfg) for i, lab in enumerate(case_labels(cfg))]


def write_cohort_files(cases, cohort_csv, image_dir, mask_dir):
    """Clinical CSV plus ``<id>_<SEQ>.nii.gz`` images and ``<id>_<ET|CC|ED|WT>.nii.gz`` masks."""
    image_dir, mask_dir, cohort_csv = Path(image_dir), Path(mask_dir), Path(cohort_csv)
    for d in (image_dir, mask_dir, cohort_csv.parent):
        d.mkdir(parents=True, exist_ok=True)
    write_cohort([c.record for c in cases], cohort_csv)
    for c in cases:
        for seq, vol in c.bundle.sequences.items():
            write_nifti(vol, image_dir / f"{c.bundle.case_id}_{seq}.nii.gz")
        for name in MASK_NAMES:
            write_nifti(c.bundle.masks[name], mask_dir / f"{c.bundle.case_id}_{name}.nii.gz")


def write_cohort_dir(cases, out_dir):
    """``clinical.csv``, ``images/`` and ``masks/`` under ``out_dir``."""
    out = Path(out_dir)
    write_cohort_files(cases, out / "clinical.csv", out / "images", out / "masks")
    return out


def replay_paper_cohort_counts():
    """105 timing-only records: 7 deceased, 41 without EFS, 1 pre-chemotherapy EFS, 56 during/after."""
    records = []

    def add(**timing):
        records.append(ClinicalRecord(case_id=f"R{len(records):03d}", age_at_event_days=1000, **timing))

    for _ in range(7):
        add(deceased_due_to_illness=True, t_efs=1500, t_chemo_start=1100, t_chemo_end=1400)
    for _ in range(41):
        add(t_chemo_start=1100, t_chemo_end=1400)
    add(t_efs=1050, t_chemo_start=1100, t_chemo_end=1400)
    for k in range(56):
        # alternate during and after chemotherapy
        add(t_efs=1200 if k % 2 == 0 else 1600, t_chemo_start=1100, t_chemo_end=1400)
    return records
