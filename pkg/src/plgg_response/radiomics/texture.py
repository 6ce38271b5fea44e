"""Texture features from the matrices in :mod:`.matrices`.

Formulas follow the IBSI / pyradiomics definitions. Entropies use ``log2``
summed over non-zero probabilities only, so a single-cell matrix has entropy
exactly 0.
"""
from __future__ import annotations

import numpy as np

from .discretize import DiscretizedRoi, RadiomicsConfig
from .matrices import glcm_matrices, gldm_matrix, glrlm_matrices, glszm_matrix

GLCM_NAMES = (
    "Autocorrelation",
    "JointAverage",
    "ClusterProminence",
    "ClusterShade",
    "ClusterTendency",
    "Contrast",
    "Correlation",
    "DifferenceAverage",
    "DifferenceEntropy",
    "DifferenceVariance",
    "JointEnergy",
    "JointEntropy",
    "Imc1",
    "Imc2",
    "Idm",
    "MCC",
    "Idmn",
    "Id",
    "Idn",
    "InverseVariance",
    "MaximumProbability",
    "SumAverage",
    "SumEntropy",
    "SumSquares",
)
GLRLM_NAMES = (
    "ShortRunEmphasis",
    "LongRunEmphasis",
    "GrayLevelNonUniformity",
    "GrayLevelNonUniformityNormalized",
    "RunLengthNonUniformity",
    "RunLengthNonUniformityNormalized",
    "RunPercentage",
    "GrayLevelVariance",
    "RunVariance",
    "RunEntropy",
    "LowGrayLevelRunEmphasis",
    "HighGrayLevelRunEmphasis",
    "ShortRunLowGrayLevelEmphasis",
    "ShortRunHighGrayLevelEmphasis",
    "LongRunLowGrayLevelEmphasis",
    "LongRunHighGrayLevelEmphasis",
)
GLSZM_NAMES = (
    "SmallAreaEmphasis",
    "LargeAreaEmphasis",
    "GrayLevelNonUniformity",
    "GrayLevelNonUniformityNormalized",
    "SizeZoneNonUniformity",
    "SizeZoneNonUniformityNormalized",
    "ZonePercentage",
    "GrayLevelVariance",
    "ZoneVariance",
    "ZoneEntropy",
    "LowGrayLevelZoneEmphasis",
    "HighGrayLevelZoneEmphasis",
    "SmallAreaLowGrayLevelEmphasis",
    "SmallAreaHighGrayLevelEmphasis",
    "LargeAreaLowGrayLevelEmphasis",
    "LargeAreaHighGrayLevelEmphasis",
)
GLDM_NAMES = (
    "SmallDependenceEmphasis",
    "LargeDependenceEmphasis",
    "GrayLevelNonUniformity",
    "DependenceNonUniformity",
    "DependenceNonUniformityNormalized",
    "GrayLevelVariance",
    "DependenceVariance",
    "DependenceEntropy",
    "LowGrayLevelEmphasis",
    "HighGrayLevelEmphasis",
    "SmallDependenceLowGrayLevelEmphasis",
    "SmallDependenceHighGrayLevelEmphasis",
    "LargeDependenceLowGrayLevelEmphasis",
    "LargeDependenceHighGrayLevelEmphasis",
)


def entropy(p):
    p = np.asarray(p, dtype=np.float64).ravel()
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum()) + 0.0


def normalize(P):
    total = P.sum()
    return P / total if total > 0 else P


# ---------------------------------------------------------------------- GLCM


def _glcm_single(p, ng):
    """Features of one normalized, symmetric co-occurrence matrix."""
    i = np.arange(1, ng + 1, dtype=np.float64)[:, None]
    j = i.T
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    lv = np.arange(1, ng + 1, dtype=np.float64)
    ux = float((px * lv).sum())
    uy = float((py * lv).sum())
    sx = np.sqrt(float((px * (lv - ux) ** 2).sum()))
    sy = np.sqrt(float((py * (lv - uy) ** 2).sum()))

    diff = np.abs(i - j).astype(int)
    p_minus = np.bincount(diff.ravel(), weights=p.ravel(), minlength=ng)
    total = (i + j).astype(int)
    p_plus = np.bincount(total.ravel(), weights=p.ravel(), minlength=2 * ng + 1)[2:]
    k_minus = np.arange(ng, dtype=np.float64)
    k_plus = np.arange(2, 2 * ng + 1, dtype=np.float64)

    hx, hy, hxy = entropy(px), entropy(py), entropy(p)
    pxpy = np.outer(px, py)
    nz = p > 0
    hxy1 = float(-(p[nz] * np.log2(pxpy[nz])).sum())
    hxy2 = entropy(pxpy)

    shift = i + j - ux - uy
    diff_avg = float((k_minus * p_minus).sum())
    corr_num = float((p * i * j).sum()) - ux * uy
    denom = sx * sy
    h_max = max(hx, hy)
    imc2_arg = hxy2 - hxy

    # maximal correlation coefficient over occupied levels
    rows = px > 0
    cols = py > 0
    if rows.sum() < 2:
        mcc = 1.0
    else:
        sub = p[np.ix_(rows, cols)]
        q = (sub / px[rows][:, None]) @ (sub / py[cols][None, :]).T
        eig = np.sort(np.linalg.eigvals(q).real)[::-1]
        mcc = float(np.sqrt(max(eig[1], 0.0)))

    off = k_minus > 0
    return np.array(
        [
            (p * i * j).sum(),
            ux,
            (shift**4 * p).sum(),
            (shift**3 * p).sum(),
            (shift**2 * p).sum(),
            ((i - j) ** 2 * p).sum(),
            corr_num / denom if denom > 0 else 1.0,
            diff_avg,
            entropy(p_minus),
            ((k_minus - diff_avg) ** 2 * p_minus).sum(),
            (p**2).sum(),
            hxy,
            (hxy - hxy1) / h_max if h_max > 0 else 0.0,
            np.sqrt(1.0 - np.exp(-2.0 * imc2_arg)) if imc2_arg > 0 else 0.0,
            (p / (1.0 + (i - j) ** 2)).sum(),
            mcc,
            (p / (1.0 + (i - j) ** 2 / ng**2)).sum(),
            (p / (1.0 + np.abs(i - j))).sum(),
            (p / (1.0 + np.abs(i - j) / ng)).sum(),
            (p_minus[off] / k_minus[off] ** 2).sum(),
            p.max(),
            (k_plus * p_plus).sum(),
            entropy(p_plus),
            ((i - ux) ** 2 * p).sum(),
        ],
        dtype=np.float64,
    )


def glcm_features(roi: DiscretizedRoi, cfg: RadiomicsConfig | None = None, matrices=None) -> dict:
    """Direction-averaged GLCM features.

    Directions without any co-occurring pair are skipped. When no direction has
    a pair (single-voxel ROI) the matrix degenerates to one diagonal cell at the
    voxel's level.
    """
    P = glcm_matrices(roi) if matrices is None else matrices
    ng = roi.n_levels
    per_direction = [_glcm_single(normalize(m), ng) for m in P if m.sum() > 0]
    if not per_direction:
        m = np.zeros((ng, ng))
        g = int(roi.levels.max()) - 1
        m[g, g] = 1.0
        per_direction = [_glcm_single(m, ng)]
    return dict(zip(GLCM_NAMES, np.mean(per_direction, axis=0).tolist()))


# ------------------------------------------------ run / zone / dependence


def _size_matrix_features(P, n_voxels):
    """Shared emphasis/non-uniformity terms for gray-level x size matrices.

    Returns a dict keyed by generic names; each family maps them to its own.
    """
    n_entries = P.sum()
    p = P / n_entries
    i = np.arange(1, P.shape[0] + 1, dtype=np.float64)[:, None]
    j = np.arange(1, P.shape[1] + 1, dtype=np.float64)[None, :]
    pg = p.sum(axis=1)
    ps = p.sum(axis=0)
    mu_g = float((pg * i[:, 0]).sum())
    mu_s = float((ps * j[0]).sum())
    return {
        "small": float((p / j**2).sum()),
        "large": float((p * j**2).sum()),
        "gln": float((P.sum(axis=1) ** 2).sum() / n_entries),
        "glnn": float((pg**2).sum()),
        "sn": float((P.sum(axis=0) ** 2).sum() / n_entries),
        "snn": float((ps**2).sum()),
        "percentage": float(n_entries / n_voxels),
        "glv": float((pg * (i[:, 0] - mu_g) ** 2).sum()),
        "sv": float((ps * (j[0] - mu_s) ** 2).sum()),
        "entropy": entropy(p),
        "low": float((p / i**2).sum()),
        "high": float((p * i**2).sum()),
        "small_low": float((p / (i**2 * j**2)).sum()),
        "small_high": float((p * i**2 / j**2).sum()),
        "large_low": float((p * j**2 / i**2).sum()),
        "large_high": float((p * i**2 * j**2).sum()),
    }


_SIZE_KEYS = (
    "small", "large", "gln", "glnn", "sn", "snn", "percentage", "glv",
    "sv", "entropy", "low", "high", "small_low", "small_high", "large_low", "large_high",
)


def glrlm_features(roi: DiscretizedRoi, cfg: RadiomicsConfig | None = None, matrices=None) -> dict:
    P = glrlm_matrices(roi) if matrices is None else matrices
    n = roi.n_voxels
    per_direction = [[_size_matrix_features(m, n)[k] for k in _SIZE_KEYS] for m in P]
    return dict(zip(GLRLM_NAMES, np.mean(per_direction, axis=0).tolist()))


def glszm_features(roi: DiscretizedRoi, cfg: RadiomicsConfig | None = None, matrix=None) -> dict:
    P = glszm_matrix(roi) if matrix is None else matrix
    f = _size_matrix_features(P, roi.n_voxels)
    return dict(zip(GLSZM_NAMES, (f[k] for k in _SIZE_KEYS)))


def gldm_features(roi: DiscretizedRoi, cfg: RadiomicsConfig | None = None, matrix=None) -> dict:
    alpha = 0.0 if cfg is None else cfg.gldm_alpha
    P = gldm_matrix(roi, alpha) if matrix is None else matrix
    f = _size_matrix_features(P, roi.n_voxels)
    keys = (
        "small", "large", "gln", "sn", "snn", "glv", "sv", "entropy",
        "low", "high", "small_low", "small_high", "large_low", "large_high",
    )
    return dict(zip(GLDM_NAMES, (f[k] for k in keys)))
