"""Shape descriptors of a binary ROI in physical (mm) coordinates.

Surface area and mesh volume come from a marching-cubes mesh of the mask.
Diameters are centre-to-centre distances between surface voxels (voxels with
at least one face-neighbour outside the ROI). Planes: ``Slice`` holds ``k``
fixed, ``Column`` holds ``j`` fixed and ``Row`` holds ``i`` fixed.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import pdist
from skimage.measure import marching_cubes, mesh_surface_area

from ..exceptions import EmptyRoiError
from ..segmentation import bounding_box
from ..volume_io import Volume3D

SHAPE_NAMES = (
    "MeshVolume",
    "VoxelVolume",
    "SurfaceArea",
    "SurfaceVolumeRatio",
    "Sphericity",
    "Maximum3DDiameter",
    "Maximum2DDiameterSlice",
    "Maximum2DDiameterColumn",
    "Maximum2DDiameterRow",
    "MajorAxisLength",
    "MinorAxisLength",
    "LeastAxisLength",
    "Elongation",
    "Flatness",
)


def max_pairwise_distance(points) -> float:
    points = np.asarray(points, dtype=np.float64)
    if len(points) < 2:
        return 0.0
    if len(points) > points.shape[1] + 1:
        try:
            points = points[ConvexHull(points).vertices]
        except (QhullError, ValueError):
            pass  # degenerate (collinear / coplanar) sets: brute force
    if len(points) > 4000:
        best = 0.0
        for start in range(0, len(points), 2000):
            chunk = points[start : start + 2000]
            d = np.sqrt(((chunk[:, None, :] - points[None, :, :]) ** 2).sum(-1))
            best = max(best, float(d.max()))
        return best
    return float(pdist(points).max())


def surface_voxels(mask: np.ndarray) -> np.ndarray:
    padded = np.pad(mask, 1)
    interior = padded.copy()
    for axis in range(3):
        for shift in (-1, 1):
            interior &= np.roll(padded, shift, axis=axis)
    return mask & ~interior[1:-1, 1:-1, 1:-1]


def exposed_face_area(mask: np.ndarray, spacing=(1.0, 1.0, 1.0)) -> float:
    """Total area of voxel faces between the ROI and the outside."""
    padded = np.pad(np.asarray(mask, dtype=np.int8), 1)
    sx, sy, sz = spacing
    face = (sy * sz, sx * sz, sx * sy)
    return float(sum(np.abs(np.diff(padded, axis=a)).sum() * face[a] for a in range(3)))


def mesh_area_volume(mask: np.ndarray, spacing=(1.0, 1.0, 1.0)):
    padded = np.pad(np.asarray(mask, dtype=np.float32), 1)
    verts, faces, _, _ = marching_cubes(padded, level=0.5, spacing=tuple(float(s) for s in spacing))
    area = float(mesh_surface_area(verts, faces))
    tri = verts[faces]
    volume = abs(float(np.einsum("ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2])).sum())) / 6.0
    return area, volume


def axis_eigenvalues(mask, spacing):
    coords = np.argwhere(mask) * np.asarray(spacing, dtype=np.float64)
    if len(coords) < 2:
        return np.zeros(3)
    cov = np.cov(coords.T, bias=True)
    return np.clip(np.sort(np.linalg.eigvalsh(cov))[::-1], 0.0, None)


def _planar_max(points, axis):
    best = 0.0
    keys = points[:, axis]
    order = np.argsort(keys, kind="stable")
    keys, pts = keys[order], points[order]
    bounds = np.flatnonzero(np.diff(keys)) + 1
    for group in np.split(pts, bounds):
        if len(group) > 1:
            best = max(best, max_pairwise_distance(np.delete(group, axis, axis=1)))
    return best


def shape_features(mask, spacing=(1.0, 1.0, 1.0)) -> dict:
    """The 14 shape features; ``mask`` is a boolean array or a LabelMask."""
    if isinstance(mask, Volume3D):
        spacing = mask.spacing
        mask = mask.data
    mask = np.asarray(mask).astype(bool)
    if not mask.any():
        raise EmptyRoiError("mask has no foreground voxels")
    mask = mask[bounding_box(mask)]
    spacing = tuple(float(s) for s in spacing)

    voxel_volume = float(mask.sum()) * float(np.prod(spacing))
    area, mesh_volume = mesh_area_volume(mask, spacing)
    surface = np.argwhere(surface_voxels(mask)) * np.asarray(spacing)

    lam = axis_eigenvalues(mask, spacing)
    if lam[0] > 0:
        elongation = float(np.sqrt(lam[1] / lam[0]))
        flatness = float(np.sqrt(lam[2] / lam[0]))
    else:
        elongation = flatness = 1.0

    values = (
        mesh_volume,
        voxel_volume,
        area,
        area / mesh_volume,
        (36.0 * np.pi * mesh_volume**2) ** (1.0 / 3.0) / area,
        max_pairwise_distance(surface),
        _planar_max(surface, 2),
        _planar_max(surface, 1),
        _planar_max(surface, 0),
        4.0 * np.sqrt(lam[0]),
        4.0 * np.sqrt(lam[1]),
        4.0 * np.sqrt(lam[2]),
        elongation,
        flatness,
    )
    return dict(zip(SHAPE_NAMES, (float(v) for v in values)))
