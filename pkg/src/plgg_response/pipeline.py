"""Per-case preparation shared by the CLI and the cross-validation driver."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evaluation.cv import CohortData
from .image_branch import crop_and_resize, pool
from .radiomics import RadiomicsConfig, extract_features
from .segmentation import merge_masks, recombine_wt


@dataclass
class PreparedCase:
    case_id: str
    radiomics: np.ndarray
    embedding: np.ndarray


def prepare_case(bundle, masks, rcfg: RadiomicsConfig = RadiomicsConfig(), margin=5):
    """Radiomic vector from T2 within the recombined whole tumour, plus the pooled image embedding."""
    merged = merge_masks(masks)
    features = extract_features(bundle.sequences["T2"], recombine_wt(merged), rcfg)
    sample = crop_and_resize(bundle, merged, margin=margin)
    return PreparedCase(bundle.case_id, features.values, pool(sample.channels))


def cohort_data(records, prepared, external_probs=None) -> CohortData:
    return CohortData(
        records=list(records),
        radiomics={p.case_id: p.radiomics for p in prepared},
        embeddings={p.case_id: p.embedding for p in prepared},
        external_probs=external_probs,
    )


def synthetic_cohort_data(cases, rcfg: RadiomicsConfig = RadiomicsConfig()) -> CohortData:
    prepared = [prepare_case(c.bundle, c.masks, rcfg) for c in cases]
    return cohort_data([c.record for c in cases], prepared)
