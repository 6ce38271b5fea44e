"""Merge subregion and whole-tumour predictions into one four-label mask."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DisjointnessError, EmptyRoiError
from .volume_io import (
    BINARY_VOCABULARY,
    CC,
    ED,
    ET,
    NET,
    SUBREGION_VOCABULARY,
    LabelMask,
    check_congruent,
)

# one-hot channel order used by the image branch
CHANNEL_LABELS = (ET, NET, CC, ED)


@dataclass(frozen=True, eq=False)
class SubregionMasks:
    """Binary outputs of the two upstream segmentation models.

    ``et``, ``cc`` and ``ed`` come from the multi-subregion model and must not
    overlap; ``wt`` comes from the whole-tumour model.
    """

    et: LabelMask
    cc: LabelMask
    ed: LabelMask
    wt: LabelMask

    def __post_init__(self):
        check_congruent([self.et, self.cc, self.ed, self.wt], what="subregion masks")
        for name in ("et", "cc", "ed", "wt"):
            data = getattr(self, name).data
            if not np.isin(data, (0, 1)).all():
                raise DisjointnessError(f"{name} mask is not binary")
        overlap = (
            self.et.data.astype(np.int16) + self.cc.data.astype(np.int16) + self.ed.data.astype(np.int16)
        ) > 1
        if overlap.any():
            raise DisjointnessError(f"ET/CC/ED masks overlap in {int(overlap.sum())} voxels")

    @classmethod
    def from_arrays(cls, et, cc, ed, wt, like=None):
        return cls(*(LabelMask.binary(a, like) for a in (et, cc, ed, wt)))


def merge_masks(m: SubregionMasks) -> LabelMask:
    """Four-label mask {0, ET=1, NET=2, CC=3, ED=4}.

    Whole-tumour voxels not claimed by ET, CC or ED become NET. ET/CC/ED voxels
    that fall outside the whole-tumour prediction keep their own label.
    """
    et, cc, ed, wt = (np.asarray(x.data, dtype=bool) for x in (m.et, m.cc, m.ed, m.wt))
    out = np.zeros(et.shape, dtype=np.uint8)
    out[wt & ~(et | cc | ed)] = NET
    out[et] = ET
    out[cc] = CC
    out[ed] = ED
    return m.wt.with_data(out, vocabulary=SUBREGION_VOCABULARY)


def recombine_wt(merged: LabelMask) -> LabelMask:
    """Binary whole-tumour mask: any of the four subregion labels."""
    return merged.with_data((np.asarray(merged.data) > 0).astype(np.uint8), vocabulary=BINARY_VOCABULARY)


def one_hot(merged: LabelMask) -> np.ndarray:
    """``(4, nx, ny, nz)`` uint8 indicator channels in :data:`CHANNEL_LABELS` order."""
    data = np.asarray(merged.data)
    return np.stack([(data == lab) for lab in CHANNEL_LABELS]).astype(np.uint8)


def decompose(merged: LabelMask) -> SubregionMasks:
    """Split a merged mask back into subregion masks with ``wt = recombine_wt``."""
    data = np.asarray(merged.data)
    return SubregionMasks(
        *(
            merged.with_data((data == lab).astype(np.uint8), vocabulary=BINARY_VOCABULARY)
            for lab in (ET, CC, ED)
        ),
        recombine_wt(merged),
    )


def bounding_box(mask: np.ndarray, margin=0):
    """Inclusive-exclusive slices of the foreground, grown by ``margin`` and clipped."""
    idx = np.argwhere(mask)
    if idx.size == 0:
        raise EmptyRoiError("mask has no foreground voxels")
    lo = np.maximum(idx.min(axis=0) - margin, 0)
    hi = np.minimum(idx.max(axis=0) + 1 + margin, mask.shape)
    return tuple(slice(int(a), int(b)) for a, b in zip(lo, hi))
