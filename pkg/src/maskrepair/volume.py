"""Voxel-domain containers: label volumes, binary masks and segmentation cases.

All containers are immutable. Their arrays are flagged read-only, so they can
be handed to worker processes or shared between threads without copying.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, OverlapConflict, UnknownLabel

AXIS_CODES = ("LR", "AP", "SI")
UNMAPPED = "unmapped"

Orientation = Tuple[Optional[str], Optional[str], Optional[str]]


def _frozen_array(data, dtype):
    arr = np.asarray(data)
    if arr.dtype != dtype or arr.flags.writeable or not arr.flags.c_contiguous:
        arr = np.array(arr, dtype=dtype, order="C", copy=True)
    arr.setflags(write=False)
    return arr


def _check_spacing(spacing):
    spacing = tuple(float(s) for s in spacing)
    if len(spacing) != 3 or not all(np.isfinite(s) and s > 0 for s in spacing):
        raise ValueError(f"spacing must be three positive reals, got {spacing}")
    return spacing


def _check_orientation(orientation) -> Orientation:
    if orientation is None:
        return (None, None, None)
    codes = tuple(None if c in (None, "", "?") else str(c).upper() for c in orientation)
    if len(codes) != 3:
        raise ValueError("orientation needs one code per axis")
    known = [c for c in codes if c is not None]
    for c in known:
        if c not in AXIS_CODES:
            raise ValueError(f"unknown orientation code {c!r}; expected one of {AXIS_CODES}")
    if len(set(known)) != len(known):
        raise ValueError(f"orientation codes must be distinct, got {codes}")
    return codes  # type: ignore[return-value]


def lateral_axis(orientation: Orientation, fallback: int = 0) -> int:
    """Index of the left-right axis, or ``fallback`` when orientation is unknown."""
    if orientation and "LR" in orientation:
        return orientation.index("LR")
    return fallback


@dataclass(frozen=True, eq=False)
class LabelVolume:
    """Dense 3-D grid of non-negative integer label ids (0 is background)."""

    data: np.ndarray
    spacing: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    orientation: Orientation = (None, None, None)

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise DimensionMismatch(f"label volume must be 3-D, got shape {arr.shape}")
        if arr.dtype.kind not in "iub":
            raise TypeError(f"label data must be integer typed, got {arr.dtype}")
        if arr.size and arr.min() < 0:
            raise ValueError("label ids must be non-negative")
        if arr.size and arr.max() > np.iinfo(np.int32).max:
            raise ValueError("label ids must fit in int32")
        object.__setattr__(self, "data", _frozen_array(arr, np.int32))
        object.__setattr__(self, "spacing", _check_spacing(self.spacing))
        object.__setattr__(self, "orientation", _check_orientation(self.orientation))

    @property
    def dims(self):
        return self.data.shape

    def labels(self):
        """Sorted nonzero label ids present in the volume."""
        present = np.unique(self.data)
        return [int(v) for v in present if v != 0]

    def __eq__(self, other):
        if not isinstance(other, LabelVolume):
            return NotImplemented
        return (
            self.spacing == other.spacing
            and self.orientation == other.orientation
            and np.array_equal(self.data, other.data)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Single-organ boolean grid with cached foreground count."""

    data: np.ndarray
    spacing: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    orientation: Orientation = (None, None, None)
    count: int = field(init=False)

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise DimensionMismatch(f"mask must be 3-D, got shape {arr.shape}")
        arr = _frozen_array(arr.astype(bool, copy=False), np.bool_)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "spacing", _check_spacing(self.spacing))
        object.__setattr__(self, "orientation", _check_orientation(self.orientation))
        object.__setattr__(self, "count", int(np.count_nonzero(arr)))

    @property
    def dims(self):
        return self.data.shape

    @property
    def empty(self) -> bool:
        return self.count == 0

    @property
    def voxel_volume(self) -> float:
        return float(np.prod(self.spacing))

    def like(self, data) -> "BinaryMask":
        """New mask on the same grid."""
        return BinaryMask(data, self.spacing, self.orientation)

    @classmethod
    def zeros(cls, dims, spacing=(1.0, 1.0, 1.0), orientation=None) -> "BinaryMask":
        return cls(np.zeros(dims, dtype=bool), spacing, orientation)

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return (
            self.spacing == other.spacing
            and self.orientation == other.orientation
            and np.array_equal(self.data, other.data)
        )

    __hash__ = None  # type: ignore[assignment]


def check_disjoint(organs: Mapping[str, BinaryMask]) -> None:
    """Raise OverlapConflict if any voxel belongs to two organ masks."""
    owner = None
    names = []
    for name, mask in organs.items():
        if mask.empty:
            continue
        if owner is None:
            owner = np.full(mask.dims, -1, dtype=np.int16)
        clash = mask.data & (owner >= 0)
        if clash.any():
            voxel = np.argwhere(clash)[0]
            raise OverlapConflict(voxel, names[owner[tuple(voxel)]], name)
        owner[mask.data] = len(names)
        names.append(name)


@dataclass(frozen=True, eq=False)
class SegmentationCase:
    """A label volume together with its organ-wise decomposition.

    Organ masks must share the volume's grid and be pairwise disjoint; both are
    verified on construction.
    """

    case_id: str
    volume: LabelVolume
    organs: Mapping[str, BinaryMask]
    provenance: str = "synthetic"

    def __post_init__(self):
        organs = dict(self.organs)
        for name, mask in organs.items():
            if mask.dims != self.volume.dims:
                raise DimensionMismatch(
                    f"organ {name!r} has dims {mask.dims}, volume has {self.volume.dims}"
                )
            if mask.spacing != self.volume.spacing or mask.orientation != self.volume.orientation:
                raise DimensionMismatch(f"organ {name!r} grid metadata differs from the volume")
        check_disjoint(organs)
        object.__setattr__(self, "organs", organs)

    @property
    def dims(self):
        return self.volume.dims

    @property
    def spacing(self):
        return self.volume.spacing

    @property
    def orientation(self):
        return self.volume.orientation

    def mask(self, name: str) -> BinaryMask:
        """Organ mask, or an empty mask if the organ is absent."""
        found = self.organs.get(name)
        if found is None:
            return BinaryMask.zeros(self.dims, self.spacing, self.orientation)
        return found

    def __eq__(self, other):
        if not isinstance(other, SegmentationCase):
            return NotImplemented
        return (
            self.case_id == other.case_id
            and self.volume == other.volume
            and list(self.organs) == list(other.organs)
            and all(self.organs[k] == other.organs[k] for k in self.organs)
        )

    __hash__ = None  # type: ignore[assignment]


def decompose(volume: LabelVolume, schema, strict: bool = False,
              case_id: str = "case", provenance: str = "synthetic") -> SegmentationCase:
    """Split a packed label volume into one binary mask per schema organ.

    Labels absent from the schema raise ``UnknownLabel`` in strict mode and are
    otherwise gathered under the reserved ``"unmapped"`` organ.
    """
    mask_labels = schema.mask_labels()
    known = set(mask_labels.values())
    stray = [v for v in volume.labels() if v not in known]
    if stray and strict:
        raise UnknownLabel(stray[0])

    organs = {}
    for name, label_id in mask_labels.items():
        organs[name] = BinaryMask(volume.data == label_id, volume.spacing, volume.orientation)
    if stray:
        unmapped = np.isin(volume.data, stray)
        organs[UNMAPPED] = BinaryMask(unmapped, volume.spacing, volume.orientation)
    return SegmentationCase(case_id, volume, organs, provenance)


def recompose(case: SegmentationCase, schema) -> LabelVolume:
    """Pack organ masks back into a label volume.

    Voxels of the ``"unmapped"`` organ keep the label they carry in
    ``case.volume``.
    """
    check_disjoint(case.organs)
    mask_labels = schema.mask_labels()
    out = np.zeros(case.dims, dtype=np.int32)
    for name, mask in case.organs.items():
        if mask.empty:
            continue
        if name == UNMAPPED:
            out[mask.data] = case.volume.data[mask.data]
        else:
            out[mask.data] = mask_labels[name]
    return LabelVolume(out, case.spacing, case.orientation)


def with_organs(case: SegmentationCase, organs: Mapping[str, BinaryMask], schema) -> SegmentationCase:
    """Case with replaced organ masks and a volume rebuilt to match them."""
    draft = SegmentationCase(case.case_id, case.volume, organs, case.provenance)
    return SegmentationCase(case.case_id, recompose(draft, schema), organs, case.provenance)
