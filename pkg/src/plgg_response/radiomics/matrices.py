"""Texture matrix builders (GLCM, GLRLM, GLSZM, GLDM) on a discretized ROI.

All builders return raw counts. Row ``g - 1`` holds gray level ``g``. Column
meaning depends on the family: co-occurring level (GLCM), run length (GLRLM),
zone size (GLSZM) or dependence count + 1 (GLDM).
"""
from __future__ import annotations

import itertools

import numba
import numpy as np
from scipy import ndimage

from .discretize import DiscretizedRoi

# 13 unique offsets of the 26-neighbourhood (the other 13 are their negatives)
DIRECTIONS = tuple(
    d for d in itertools.product((-1, 0, 1), repeat=3) if d > (0, 0, 0)
)
NEIGHBOURS_26 = tuple(d for d in itertools.product((-1, 0, 1), repeat=3) if d != (0, 0, 0))


def _shifted_pair(arr, offset):
    """Views ``(a, b)`` with ``b[v] == arr[v + offset]`` over the overlapping region."""
    src, dst = [], []
    for d, n in zip(offset, arr.shape):
        src.append(slice(max(0, -d), n - max(0, d)))
        dst.append(slice(max(0, d), n + min(0, d)))
    return arr[tuple(src)], arr[tuple(dst)]


def glcm_matrices(roi: DiscretizedRoi) -> np.ndarray:
    """Symmetric co-occurrence counts, shape ``(13, Ng, Ng)``."""
    ng = roi.n_levels
    out = np.zeros((len(DIRECTIONS), ng, ng), dtype=np.float64)
    for k, d in enumerate(DIRECTIONS):
        a, b = _shifted_pair(roi.levels, d)
        both = (a > 0) & (b > 0)
        codes = (a[both] - 1) * ng + (b[both] - 1)
        counts = np.bincount(codes, minlength=ng * ng).reshape(ng, ng)
        out[k] = counts + counts.T
    return out


@numba.njit(cache=True)
def _run_lengths(levels, di, dj, dk, ng, max_run):
    nx, ny, nz = levels.shape
    P = np.zeros((ng, max_run), dtype=np.float64)
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                g = levels[i, j, k]
                if g == 0:
                    continue
                pi, pj, pk = i - di, j - dj, k - dk
                # only start counting at the first voxel of a run
                if 0 <= pi < nx and 0 <= pj < ny and 0 <= pk < nz and levels[pi, pj, pk] == g:
                    continue
                length = 1
                ci, cj, ck = i + di, j + dj, k + dk
                while 0 <= ci < nx and 0 <= cj < ny and 0 <= ck < nz and levels[ci, cj, ck] == g:
                    length += 1
                    ci += di
                    cj += dj
                    ck += dk
                P[g - 1, length - 1] += 1.0
    return P


def glrlm_matrices(roi: DiscretizedRoi) -> np.ndarray:
    """Run-length counts per direction, shape ``(13, Ng, max_run)``."""
    levels = np.ascontiguousarray(roi.levels, dtype=np.int32)
    max_run = max(levels.shape)
    out = np.stack(
        [_run_lengths(levels, d[0], d[1], d[2], roi.n_levels, max_run) for d in DIRECTIONS]
    )
    used = np.flatnonzero(out.sum(axis=(0, 1)))
    return out[:, :, : used[-1] + 1]


_STRUCTURE_26 = np.ones((3, 3, 3), dtype=bool)


def glszm_matrix(roi: DiscretizedRoi) -> np.ndarray:
    """Zone counts by gray level and zone size (26-connected), shape ``(Ng, max_size)``."""
    ng = roi.n_levels
    sizes_by_level = []
    max_size = 1
    for g in range(1, ng + 1):
        labelled, n = ndimage.label(roi.levels == g, structure=_STRUCTURE_26)
        sizes = np.bincount(labelled.ravel())[1:] if n else np.zeros(0, dtype=np.int64)
        sizes_by_level.append(sizes)
        if sizes.size:
            max_size = max(max_size, int(sizes.max()))
    P = np.zeros((ng, max_size), dtype=np.float64)
    for g, sizes in enumerate(sizes_by_level):
        if sizes.size:
            P[g] = np.bincount(sizes - 1, minlength=max_size)
    return P


def dependence_counts(roi: DiscretizedRoi, alpha=0.0) -> np.ndarray:
    """Per-voxel number of 26-neighbours in the ROI with ``|level difference| <= alpha``."""
    levels = roi.levels
    counts = np.zeros(levels.shape, dtype=np.int32)
    for d in NEIGHBOURS_26:
        here, there = _shifted_pair(levels, tuple(-x for x in d))
        target = _shifted_pair(counts, tuple(-x for x in d))[0]
        target += ((here > 0) & (there > 0) & (np.abs(here - there) <= alpha)).astype(np.int32)
    return counts


def gldm_matrix(roi: DiscretizedRoi, alpha=0.0) -> np.ndarray:
    """Voxel counts by gray level and dependence count + 1, shape ``(Ng, 27)``."""
    ng = roi.n_levels
    dep = dependence_counts(roi, alpha)
    inside = roi.levels > 0
    codes = (roi.levels[inside] - 1) * 27 + dep[inside]
    return np.bincount(codes, minlength=ng * 27).reshape(ng, 27).astype(np.float64)
