from __future__ import annotations

import numpy as np

from .discretize import RadiomicsConfig, roi_values
from .texture import entropy

FIRSTORDER_NAMES = (
    "Minimum",
    "Maximum",
    "Mean",
    "Median",
    "10Percentile",
    "90Percentile",
    "Skewness",
    "Kurtosis",
    "Variance",
    "StandardDeviation",
    "Energy",
    "TotalEnergy",
    "Entropy",
    "InterquartileRange",
    "Range",
    "MeanAbsoluteDeviation",
    "RobustMeanAbsoluteDeviation",
    "RootMeanSquared",
)


def percentile(x, q):
    """Linear interpolation between closest ranks (numpy's default ``linear`` rule).

    For sorted ``x`` of length ``n`` the position is ``(n - 1) * q / 100``.
    """
    return float(np.percentile(x, q, method="linear"))


def firstorder_from_values(x, voxel_volume=1.0, bin_width=25.0) -> dict:
    x = np.asarray(x, dtype=np.float64).ravel()
    mean = x.mean()
    dev = x - mean
    m2 = float((dev**2).mean())
    if m2 > 0:
        skew = float((dev**3).mean()) / m2**1.5
        kurt = float((dev**4).mean()) / m2**2
    else:
        skew = kurt = 0.0
    p10, p25, p75, p90 = (percentile(x, q) for q in (10, 25, 75, 90))
    robust = x[(x >= p10) & (x <= p90)]
    levels = np.floor((x - x.min()) / bin_width).astype(np.int64)
    hist = np.bincount(levels) / x.size
    energy = float((x**2).sum())
    values = (
        x.min(),
        x.max(),
        mean,
        float(np.median(x)),
        p10,
        p90,
        skew,
        kurt,
        m2,
        np.sqrt(m2),
        energy,
        energy * voxel_volume,
        entropy(hist),
        p75 - p25,
        x.max() - x.min(),
        float(np.abs(dev).mean()),
        float(np.abs(robust - robust.mean()).mean()),
        float(np.sqrt((x**2).mean())),
    )
    return dict(zip(FIRSTORDER_NAMES, (float(v) for v in values)))


def firstorder_features(vol, mask, cfg: RadiomicsConfig = RadiomicsConfig()) -> dict:
    """Intensity statistics over the ROI. Kurtosis is non-excess (Gaussian -> 3)."""
    x = roi_values(vol, mask)
    return firstorder_from_values(x, float(np.prod(vol.spacing)), cfg.bin_width)
