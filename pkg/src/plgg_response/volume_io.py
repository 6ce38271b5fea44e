"""3D volumes, label masks and NIfTI-1 input/output.

Every downstream module works on arrays indexed ``[i, j, k]`` with ``dims =
(nx, ny, nz)``. Geometry is carried as voxel spacing (mm) plus a 3x3 direction
cosine matrix and an origin, which together form the usual 4x4 voxel-to-world
affine.
"""
from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import nibabel as nib
import numpy as np

from .exceptions import (
    FormatError,
    GridError,
    IoError,
    ModeError,
    ShapeError,
    UnsupportedDatatype,
)

SEQUENCES = ("T1", "T1CE", "T2", "FLAIR")

# label codes of the merged four-subregion segmentation
BACKGROUND, ET, NET, CC, ED = 0, 1, 2, 3, 4
SUBREGION_VOCABULARY = frozenset({BACKGROUND, ET, NET, CC, ED})
BINARY_VOCABULARY = frozenset({0, 1})

SPACING_TOL = 1e-5
ORIENTATION_TOL = 1e-5

# NIfTI-1 datatype codes accepted on read and write
_NIFTI_DTYPES = {
    2: np.dtype(np.uint8),
    4: np.dtype("<i2"),
    8: np.dtype("<i4"),
    16: np.dtype("<f4"),
    64: np.dtype("<f8"),
}
_HEADER_SIZE = 348


def _frozen(array):
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Volume3D:
    """Scalar intensity grid with physical geometry.

    Parameters
    ----------
    data : array-like of shape (nx, ny, nz)
        Finite intensities.
    spacing : tuple of 3 floats
        Voxel size in mm; all components strictly positive.
    direction : (3, 3) array, optional
        Direction cosines, columns are the world directions of the i, j, k axes.
    origin : (3,) array, optional
        World position (mm) of the centre of voxel (0, 0, 0).
    """

    data: np.ndarray
    spacing: tuple = (1.0, 1.0, 1.0)
    direction: np.ndarray = field(default_factory=lambda: np.eye(3))
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise ShapeError(f"expected a 3D array, got shape {data.shape}")
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 3 or not all(s > 0 and np.isfinite(s) for s in spacing):
            raise ShapeError(f"spacing must be 3 positive finite values, got {self.spacing}")
        direction = np.asarray(self.direction, dtype=float)
        origin = np.asarray(self.origin, dtype=float)
        if direction.shape != (3, 3) or origin.shape != (3,):
            raise ShapeError("direction must be 3x3 and origin length 3")
        self._validate_data(data)
        object.__setattr__(self, "data", _frozen(data))
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "direction", _frozen(direction))
        object.__setattr__(self, "origin", _frozen(origin))

    def _validate_data(self, data):
        if not np.issubdtype(data.dtype, np.number) or np.issubdtype(data.dtype, np.complexfloating):
            raise ShapeError(f"unsupported voxel dtype {data.dtype}")
        if not np.all(np.isfinite(data)):
            raise ShapeError("volume contains non-finite values")

    @property
    def dims(self):
        return tuple(int(n) for n in self.data.shape)

    @property
    def affine(self):
        aff = np.eye(4)
        aff[:3, :3] = self.direction * np.asarray(self.spacing)[None, :]
        aff[:3, 3] = self.origin
        return aff

    def with_data(self, data, spacing=None):
        """Copy with new voxel data (same geometry unless ``spacing`` is given)."""
        return type(self)(
            data,
            self.spacing if spacing is None else spacing,
            self.direction,
            self.origin,
        )


@dataclass(frozen=True, eq=False)
class LabelMask(Volume3D):
    """Integer label grid sharing the :class:`Volume3D` geometry contract."""

    vocabulary: frozenset = SUBREGION_VOCABULARY

    def _validate_data(self, data):
        if not np.issubdtype(data.dtype, np.integer) and data.dtype != bool:
            raise ShapeError(f"label masks need integer data, got {data.dtype}")
        present = set(np.unique(data).tolist())
        unknown = present - set(self.vocabulary)
        if unknown:
            raise ShapeError(f"labels {sorted(unknown)} outside vocabulary {sorted(self.vocabulary)}")

    def with_data(self, data, spacing=None, vocabulary=None):
        return type(self)(
            data,
            self.spacing if spacing is None else spacing,
            self.direction,
            self.origin,
            self.vocabulary if vocabulary is None else vocabulary,
        )

    @classmethod
    def binary(cls, data, like: Volume3D | None = None):
        data = np.asarray(data).astype(np.uint8)
        if like is None:
            return cls(data, vocabulary=BINARY_VOCABULARY)
        return cls(data, like.spacing, like.direction, like.origin, BINARY_VOCABULARY)


def same_grid(a: Volume3D, b: Volume3D) -> bool:
    return (
        a.dims == b.dims
        and np.allclose(a.spacing, b.spacing, rtol=0, atol=SPACING_TOL)
        and np.allclose(a.direction, b.direction, rtol=0, atol=ORIENTATION_TOL)
        and np.allclose(a.origin, b.origin, rtol=0, atol=SPACING_TOL)
    )


def check_congruent(grids: Iterable[Volume3D], what="grids"):
    """Raise :class:`GridError` unless all grids share dims, spacing and orientation."""
    grids = list(grids)
    for other in grids[1:]:
        if not same_grid(grids[0], other):
            raise GridError(
                f"{what} disagree: dims {grids[0].dims} vs {other.dims}, "
                f"spacing {grids[0].spacing} vs {other.spacing}"
            )


@dataclass(frozen=True, eq=False)
class CaseBundle:
    """The four MRI sequences and the segmentation masks of one patient."""

    case_id: str
    sequences: Mapping[str, Volume3D]
    masks: Mapping[str, LabelMask] = field(default_factory=dict)

    def __post_init__(self):
        missing = [s for s in SEQUENCES if s not in self.sequences]
        if missing:
            raise ShapeError(f"case {self.case_id}: missing sequences {missing}")
        check_congruent(
            [self.sequences[s] for s in SEQUENCES] + list(self.masks.values()),
            what=f"case {self.case_id} grids",
        )

    @property
    def reference(self) -> Volume3D:
        return self.sequences["T2"]


# --------------------------------------------------------------------- NIfTI


def _read_header_bytes(path: Path) -> bytes:
    with open(path, "rb") as fh:
        head = fh.read(2)
        fh.seek(0)
        if head == b"\x1f\x8b":
            with gzip.open(fh) as gz:
                return gz.read(_HEADER_SIZE)
        return fh.read(_HEADER_SIZE)


def read_nifti(path, is_mask=False, vocabulary=None):
    """Load a NIfTI-1 file as a :class:`Volume3D` or :class:`LabelMask`.

    ``is_mask`` must be passed explicitly for segmentation files; the datatype
    alone never decides whether voxels are labels.
    """
    path = Path(path)
    if not path.exists():
        raise IoError(f"no such file: {path}")
    raw = _read_header_bytes(path)
    if len(raw) < _HEADER_SIZE:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    if struct.unpack("<i", raw[:4])[0] != _HEADER_SIZE:
        raise FormatError(f"{path}: not a little-endian NIfTI-1 header")
    magic = raw[344:348]
    if magic not in (b"n+1\x00", b"ni1\x00"):
        raise FormatError(f"{path}: bad magic {magic!r}")
    dim = struct.unpack("<8h", raw[40:56])
    datatype = struct.unpack("<h", raw[70:72])[0]
    if datatype not in _NIFTI_DTYPES:
        raise UnsupportedDatatype(f"{path}: NIfTI datatype code {datatype}")
    if dim[0] not in (3, 4) or (dim[0] == 4 and dim[4] > 1):
        raise ShapeError(f"{path}: expected a single 3D volume, got dim={dim[:5]}")

    img = nib.Nifti1Image.from_filename(str(path))
    hdr = img.header
    data = np.asanyarray(img.dataobj.get_unscaled()).reshape(dim[1:4], order="F")
    # nibabel hides scl_* once loaded, so take them from the raw header
    slope, inter = struct.unpack("<2f", raw[112:120])
    scaled = np.isfinite(slope) and slope != 0 and (slope, inter) != (1.0, 0.0)

    spacing = tuple(float(abs(p)) for p in hdr["pixdim"][1:4])
    affine = None
    if int(hdr["sform_code"]) > 0:
        affine = hdr.get_sform()
    elif int(hdr["qform_code"]) > 0:
        affine = hdr.get_qform()
    if affine is None:
        direction, origin = np.eye(3), np.zeros(3)
    else:
        direction = affine[:3, :3] / np.asarray(spacing)[None, :]
        origin = affine[:3, 3]

    if is_mask:
        if scaled:
            values = data * slope + inter
            if not np.allclose(values, np.round(values)):
                raise FormatError(f"{path}: scaled mask values are not integers")
            data = np.round(values).astype(np.int32)
        if not np.issubdtype(data.dtype, np.integer):
            raise UnsupportedDatatype(f"{path}: mask stored as {data.dtype}")
        if vocabulary is None:
            present = set(np.unique(data).tolist())
            vocabulary = BINARY_VOCABULARY if present <= BINARY_VOCABULARY else SUBREGION_VOCABULARY
        return LabelMask(np.array(data), spacing, direction, origin, frozenset(vocabulary))
    if scaled:
        data = data.astype(np.float64) * slope + inter
    return Volume3D(np.array(data), spacing, direction, origin)


def write_nifti(vol: Volume3D, path):
    """Write ``vol`` as a single-file NIfTI-1 (``.nii`` or ``.nii.gz``)."""
    data = np.asarray(vol.data)
    if data.dtype == bool:
        data = data.astype(np.uint8)
    code = next((c for c, dt in _NIFTI_DTYPES.items() if dt == data.dtype.newbyteorder("<")), None)
    if code is None:
        raise UnsupportedDatatype(f"cannot write voxel dtype {data.dtype}")
    img = nib.Nifti1Image(data, vol.affine)
    img.header.set_data_dtype(data.dtype)
    img.header.set_slope_inter(1.0, 0.0)
    img.set_sform(vol.affine, code=1)
    img.set_qform(vol.affine, code=1)
    try:
        img.to_filename(str(path))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------- resampling


def _sample_positions(n_in, n_out):
    # corner-aligned: first and last voxel centres coincide
    if n_out == 1:
        return np.array([(n_in - 1) / 2.0])
    return np.arange(n_out) * ((n_in - 1) / (n_out - 1))


def _linear_axis(arr, positions, axis):
    n = arr.shape[axis]
    if n == 1:
        return np.repeat(arr, len(positions), axis=axis)
    lo = np.clip(np.floor(positions).astype(int), 0, n - 2)
    frac = np.clip(positions - lo, 0.0, 1.0)
    shape = [1] * arr.ndim
    shape[axis] = -1
    frac = frac.reshape(shape)
    return np.take(arr, lo, axis=axis) * (1.0 - frac) + np.take(arr, lo + 1, axis=axis) * frac


def _nearest_axis(arr, positions, axis):
    idx = np.clip(np.floor(positions + 0.5).astype(int), 0, arr.shape[axis] - 1)
    return np.take(arr, idx, axis=axis)


def resample(vol: Volume3D, target_dims: Sequence[int], mode="trilinear"):
    """Resample onto a ``target_dims`` grid covering the same physical extent.

    Output voxel ``i`` along an axis samples input coordinate
    ``i * (n_in - 1) / (n_out - 1)`` (corner-aligned), with clamp-to-edge
    borders. ``trilinear`` is rejected for label masks.
    """
    target = tuple(int(n) for n in target_dims)
    if len(target) != 3 or min(target) < 1:
        raise ShapeError(f"target dims must be 3 positive ints, got {target_dims}")
    if mode not in ("trilinear", "nearest"):
        raise ModeError(f"unknown resampling mode {mode!r}")
    if mode == "trilinear" and isinstance(vol, LabelMask):
        raise ModeError("trilinear interpolation would invent labels; use mode='nearest'")
    if target == vol.dims:
        return vol

    out = np.asarray(vol.data)
    if mode == "trilinear":
        out = out.astype(np.float64)
    for axis, (n_in, n_out) in enumerate(zip(vol.dims, target)):
        pos = _sample_positions(n_in, n_out)
        out = _linear_axis(out, pos, axis) if mode == "trilinear" else _nearest_axis(out, pos, axis)

    spacing = []
    for s, n_in, n_out in zip(vol.spacing, vol.dims, target):
        if n_in > 1 and n_out > 1:
            spacing.append(s * (n_in - 1) / (n_out - 1))
        else:
            spacing.append(s * n_in / n_out)
    if mode == "trilinear" and np.issubdtype(vol.data.dtype, np.floating):
        out = out.astype(vol.data.dtype)
    return vol.with_data(out, spacing=tuple(spacing))
