"""Connected components, component statistics, distances and voxel bridges."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import EmptyMask, OutOfBounds
from .volume import BinaryMask

CONNECTIVITIES = (6, 18, 26)
_RANK = {6: 1, 18: 2, 26: 3}


def structure(conn: int) -> np.ndarray:
    """3x3x3 neighbourhood for a 6-, 18- or 26-connectivity."""
    if conn not in _RANK:
        raise ValueError(f"connectivity must be one of {CONNECTIVITIES}, got {conn}")
    return ndimage.generate_binary_structure(3, _RANK[conn])


def _as_array(mask) -> np.ndarray:
    if isinstance(mask, BinaryMask):
        return mask.data
    return np.asarray(mask, dtype=bool)


def bbox_slices(arr: np.ndarray, pad: int = 0) -> Optional[Tuple[slice, slice, slice]]:
    """Tight bounding box of the nonzero voxels, grown by ``pad`` and clipped."""
    out = []
    for axis in range(3):
        other = tuple(a for a in range(3) if a != axis)
        hit = np.flatnonzero(arr.any(axis=other))
        if hit.size == 0:
            return None
        lo = max(int(hit[0]) - pad, 0)
        hi = min(int(hit[-1]) + 1 + pad, arr.shape[axis])
        out.append(slice(lo, hi))
    return tuple(out)


@dataclass(frozen=True)
class ComponentStats:
    size: int
    size_mm3: float
    centroid: Tuple[float, float, float]
    bbox: Tuple[Tuple[int, int, int], Tuple[int, int, int]]


@dataclass(frozen=True, eq=False)
class ComponentSet:
    """Connected components of a mask.

    Component ids run from 1 to ``count`` in descending size order; equal
    sizes are ordered by their first voxel in row-major scan order.
    """

    count: int
    label_grid: np.ndarray
    sizes: np.ndarray
    spacing: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    connectivity: int = 26

    def component(self, cid: int) -> np.ndarray:
        if not 1 <= cid <= self.count:
            raise IndexError(f"component id {cid} outside 1..{self.count}")
        return self.label_grid == cid

    @cached_property
    def stats(self) -> List[ComponentStats]:
        return component_stats(self, self.spacing)


def label_components(mask, conn: int = 26) -> ComponentSet:
    """Label the connected components of ``mask`` under ``conn`` connectivity."""
    arr = _as_array(mask)
    spacing = mask.spacing if isinstance(mask, BinaryMask) else (1.0, 1.0, 1.0)
    st = structure(conn)
    grid = np.zeros(arr.shape, dtype=np.int32)
    box = bbox_slices(arr)
    if box is None:
        grid.setflags(write=False)
        return ComponentSet(0, grid, np.zeros(0, dtype=np.int64), spacing, conn)

    # scipy numbers components in raster order of their first voxel, so a
    # stable sort on size alone gives the documented tie-break
    crop, n = ndimage.label(arr[box], structure=st)
    sizes = np.bincount(crop.ravel(), minlength=n + 1)[1:]
    order = np.argsort(-sizes, kind="stable")
    lut = np.zeros(n + 1, dtype=np.int32)
    lut[order + 1] = np.arange(1, n + 1, dtype=np.int32)
    grid[box] = lut[crop]
    grid.setflags(write=False)
    return ComponentSet(n, grid, sizes[order].astype(np.int64), spacing, conn)


def component_stats(cs: ComponentSet, spacing) -> List[ComponentStats]:
    """Size, physical volume, centroid and inclusive bounding box per component."""
    if cs.count == 0:
        return []
    voxel_mm3 = float(np.prod(spacing))
    box = bbox_slices(cs.label_grid)
    crop = cs.label_grid[box]
    offset = np.array([s.start for s in box])
    idx = np.nonzero(crop)
    ids = crop[idx]
    sizes = np.bincount(ids, minlength=cs.count + 1)[1:]
    centroids = np.stack(
        [np.bincount(ids, weights=idx[a] + offset[a], minlength=cs.count + 1)[1:] / sizes
         for a in range(3)],
        axis=1,
    )
    boxes = ndimage.find_objects(crop, max_label=cs.count)
    out = []
    for i in range(cs.count):
        sl = boxes[i]
        lo = tuple(int(s.start + o) for s, o in zip(sl, offset))
        hi = tuple(int(s.stop - 1 + o) for s, o in zip(sl, offset))
        out.append(ComponentStats(
            size=int(sizes[i]),
            size_mm3=float(sizes[i]) * voxel_mm3,
            centroid=tuple(float(c) for c in centroids[i]),
            bbox=(lo, hi),
        ))
    return out


def surface_voxels(arr: np.ndarray) -> np.ndarray:
    """Index coordinates of foreground voxels with a 6-neighbour outside the mask.

    Any closest pair between two disjoint voxel sets lies on these voxels.
    """
    box = bbox_slices(arr, pad=1)
    if box is None:
        return np.zeros((0, 3), dtype=np.int64)
    crop = arr[box]
    inner = ndimage.binary_erosion(crop, structure=structure(6), border_value=0)
    pts = np.argwhere(crop & ~inner)
    return pts + np.array([s.start for s in box])


class SurfaceIndex:
    """KD-tree over a mask's surface voxels in millimetre coordinates."""

    def __init__(self, arr: np.ndarray, spacing):
        self.arr = arr
        self.spacing = np.asarray(spacing, dtype=float)
        self.points = surface_voxels(arr)
        if len(self.points) == 0:
            raise EmptyMask("cannot index an empty mask")
        self.tree = cKDTree(self.points * self.spacing)

    def distance_to(self, other: np.ndarray, other_points: Optional[np.ndarray] = None) -> float:
        if (self.arr & other).any():
            return 0.0
        pts = surface_voxels(other) if other_points is None else other_points
        if len(pts) == 0:
            raise EmptyMask("distance to an empty mask is undefined")
        d, _ = self.tree.query(pts * self.spacing, k=1)
        return float(d.min())


def min_surface_distance(a, b, spacing=None) -> float:
    """Smallest Euclidean distance in mm between voxel centres of ``a`` and ``b``."""
    arr_a, arr_b = _as_array(a), _as_array(b)
    if arr_a.shape != arr_b.shape:
        raise ValueError(f"mask shapes differ: {arr_a.shape} vs {arr_b.shape}")
    if spacing is None:
        spacing = a.spacing if isinstance(a, BinaryMask) else (1.0, 1.0, 1.0)
    if not arr_a.any() or not arr_b.any():
        raise EmptyMask("min_surface_distance needs two non-empty masks")
    return SurfaceIndex(arr_a, spacing).distance_to(arr_b)


def closest_voxel_pair(a: np.ndarray, b: np.ndarray, spacing) -> Tuple[Tuple[int, ...], Tuple[int, ...], float]:
    """Mutually closest voxel pair ``(p in a, q in b, distance_mm)``.

    Among equally close pairs the one whose midpoint lies nearest the mean
    midpoint of all tied pairs wins, so bridges run through the middle of the
    contact region rather than along its rim. Remaining ties fall to
    row-major order.
    """
    overlap = a & b
    if overlap.any():
        p = tuple(int(v) for v in np.argwhere(overlap)[0])
        return p, p, 0.0
    sp = np.asarray(spacing, dtype=float)
    pa, pb = surface_voxels(a), surface_voxels(b)
    if len(pa) == 0 or len(pb) == 0:
        raise EmptyMask("closest pair needs two non-empty masks")
    tree = cKDTree(pb * sp)
    d, _ = tree.query(pa * sp, k=1)
    dmin = float(d.min())
    tol = 1e-9 * max(1.0, dmin)
    cand_a = np.flatnonzero(d <= dmin + tol)
    pairs = np.array([(ia, ib)
                      for ia, hits in zip(cand_a, tree.query_ball_point(pa[cand_a] * sp, r=dmin + tol))
                      for ib in hits])
    mids = (pa[pairs[:, 0]] + pb[pairs[:, 1]]) / 2.0 * sp
    dist = np.round(((mids - mids.mean(axis=0)) ** 2).sum(axis=1), 9)
    keys = [tuple(pa[ia]) + tuple(pb[ib]) for ia, ib in pairs]
    best = min(range(len(pairs)), key=lambda k: (dist[k], keys[k]))
    ia, ib = pairs[best]
    return tuple(int(v) for v in pa[ia]), tuple(int(v) for v in pb[ib]), dmin


def bresenham_3d(p: Sequence[int], q: Sequence[int]) -> np.ndarray:
    """Voxels of the 26-connected digital segment from ``p`` to ``q`` inclusive."""
    p = np.asarray(p, dtype=np.int64)
    q = np.asarray(q, dtype=np.int64)
    delta = q - p
    step = np.sign(delta)
    mag = np.abs(delta)
    drive = int(np.argmax(mag))
    n = int(mag[drive])
    others = [a for a in range(3) if a != drive]
    err = {a: 2 * mag[a] - n for a in others}
    cur = p.copy()
    out = [cur.copy()]
    for _ in range(n):
        for a in others:
            if err[a] > 0:
                cur[a] += step[a]
                err[a] -= 2 * n
            err[a] += 2 * mag[a]
        cur[drive] += step[drive]
        out.append(cur.copy())
    return np.array(out, dtype=np.int64)


def ball_offsets(radius: float) -> np.ndarray:
    """Integer offsets within Euclidean distance ``radius`` of the origin."""
    r = int(np.floor(radius))
    rng = np.arange(-r, r + 1)
    g = np.stack(np.meshgrid(rng, rng, rng, indexing="ij"), axis=-1).reshape(-1, 3)
    return g[(g ** 2).sum(axis=1) <= radius * radius + 1e-9]


def bridge_segment(p, q, radius: float, like) -> BinaryMask:
    """Straight segment from ``p`` to ``q`` thickened by a ball, clipped to the grid.

    ``like`` supplies the grid: a BinaryMask or a shape tuple.
    """
    if isinstance(like, BinaryMask):
        shape, spacing, orientation = like.dims, like.spacing, like.orientation
    else:
        shape, spacing, orientation = tuple(like), (1.0, 1.0, 1.0), None
    if radius < 0:
        raise ValueError("radius must be non-negative")
    for pt in (p, q):
        if len(pt) != 3 or any(not 0 <= int(c) < s for c, s in zip(pt, shape)):
            raise OutOfBounds(f"point {tuple(pt)} outside grid {shape}")

    line = bresenham_3d(p, q)
    pts = (line[:, None, :] + ball_offsets(radius)[None, :, :]).reshape(-1, 3)
    inside = np.all((pts >= 0) & (pts < np.array(shape)), axis=1)
    pts = pts[inside]
    out = np.zeros(shape, dtype=bool)
    out[pts[:, 0], pts[:, 1], pts[:, 2]] = True
    return BinaryMask(out, spacing, orientation)
