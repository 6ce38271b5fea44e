from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import EmptyRoiError, ShapeError
from ..segmentation import bounding_box
from ..volume_io import Volume3D, check_congruent


@dataclass(frozen=True)
class RadiomicsConfig:
    """Extraction settings. Texture matrices use distance-1 neighbourhoods."""

    bin_width: float = 25.0
    glszm_connectivity: int = 26
    glcm_directions: int = 13
    gldm_alpha: float = 0.0
    gldm_connectivity: int = 26

    def __post_init__(self):
        if not self.bin_width > 0:
            raise ValueError("bin_width must be > 0")
        if self.glszm_connectivity != 26 or self.gldm_connectivity != 26 or self.glcm_directions != 13:
            raise ValueError("only 26-connectivity / 13 directions are supported")
        if self.gldm_alpha < 0:
            raise ValueError("gldm_alpha must be >= 0")


@dataclass(frozen=True, eq=False)
class DiscretizedRoi:
    """Gray levels ``1..n_levels`` inside the ROI, ``0`` outside.

    ``levels`` is cropped to the ROI bounding box and padded by one background
    voxel on every side, so neighbour lookups never leave the array.
    """

    levels: np.ndarray
    n_levels: int
    spacing: tuple = (1.0, 1.0, 1.0)

    @property
    def roi(self):
        return self.levels > 0

    @property
    def n_voxels(self):
        return int(np.count_nonzero(self.levels))

    def voxels(self):
        """``(N, 4)`` array of ``(i, j, k, level)`` in padded-crop coordinates."""
        idx = np.argwhere(self.levels > 0)
        return np.column_stack([idx, self.levels[tuple(idx.T)]])

    @classmethod
    def from_levels(cls, levels, spacing=(1.0, 1.0, 1.0)):
        """Wrap an integer level array (0 = outside ROI), cropping and padding it."""
        levels = np.asarray(levels)
        if levels.ndim != 3:
            raise ShapeError("levels must be 3D")
        if not (levels > 0).any():
            raise EmptyRoiError("ROI is empty")
        box = bounding_box(levels > 0)
        cropped = np.pad(levels[box].astype(np.int32), 1)
        return cls(cropped, int(cropped.max()), tuple(spacing))


def roi_values(vol: Volume3D, mask) -> np.ndarray:
    data = np.asarray(mask.data if isinstance(mask, Volume3D) else mask).astype(bool)
    if not data.any():
        raise EmptyRoiError("mask has no foreground voxels")
    return np.asarray(vol.data, dtype=np.float64)[data]


def discretize(vol: Volume3D, mask, cfg: RadiomicsConfig = RadiomicsConfig()) -> DiscretizedRoi:
    """Fixed-bin-width discretization anchored at the ROI minimum."""
    if isinstance(mask, Volume3D):
        check_congruent([vol, mask], what="volume and mask")
        mask = mask.data
    mask = np.asarray(mask).astype(bool)
    if mask.shape != vol.dims:
        raise ShapeError(f"mask shape {mask.shape} does not match volume {vol.dims}")
    if not mask.any():
        raise EmptyRoiError("mask has no foreground voxels")
    values = np.asarray(vol.data, dtype=np.float64)
    lo = values[mask].min()
    levels = np.zeros(mask.shape, dtype=np.int32)
    levels[mask] = np.floor((values[mask] - lo) / cfg.bin_width).astype(np.int32) + 1
    return DiscretizedRoi.from_levels(levels, vol.spacing)
