"""General-purpose shape corrections for organ masks.

Every operation is pure: it takes immutable masks and returns fresh ones plus
a :class:`StepOutcome`. When there is nothing to fix the input object itself is
returned with ``changed=False``, so callers can rely on identity as well as
equality for lazily skipped steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import EmptyMask, UnknownOrgan
from .morphology import (
    SurfaceIndex,
    bridge_segment,
    closest_voxel_pair,
    label_components,
    surface_voxels,
)
from .volume import BinaryMask, SegmentationCase, lateral_axis, with_organs


@dataclass
class StepOutcome:
    changed: bool = False
    voxels_removed: int = 0
    voxels_added: int = 0
    voxels_relabeled: int = 0
    notes: List[str] = field(default_factory=list)
    skipped: bool = False

    def __post_init__(self):
        if not self.changed and (self.voxels_removed or self.voxels_added or self.voxels_relabeled):
            raise ValueError("an unchanged step cannot report voxel changes")

    @classmethod
    def skip(cls, reason: str) -> "StepOutcome":
        return cls(changed=False, notes=[f"skipped: {reason}"], skipped=True)

    def to_dict(self) -> dict:
        return {
            "changed": self.changed,
            "skipped": self.skipped,
            "voxels_removed": self.voxels_removed,
            "voxels_added": self.voxels_added,
            "voxels_relabeled": self.voxels_relabeled,
            "notes": list(self.notes),
        }


# detectors ------------------------------------------------------------------

def has_small_components(mask: BinaryMask, threshold: int, conn: int = 26) -> bool:
    if mask.empty or threshold <= 0:
        return False
    cs = label_components(mask, conn)
    return bool(cs.sizes[-1] < threshold)


def has_excess_components(mask: BinaryMask, keep_top: int, conn: int = 26) -> bool:
    return label_components(mask, conn).count > keep_top


def has_close_fragments(mask: BinaryMask, d_merge: float, conn: int = 26) -> bool:
    cs = label_components(mask, conn)
    if cs.count < 2:
        return False
    return _closest_component_pair(cs, mask.spacing, d_merge, set()) is not None


# single-mask filters ----------------------------------------------------------

def remove_small_components(mask: BinaryMask, threshold: int, conn: int = 26):
    """Drop every connected component with fewer than ``threshold`` voxels."""
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    if mask.empty or threshold == 0:
        return mask, StepOutcome.skip("nothing below threshold")
    cs = label_components(mask, conn)
    small = np.flatnonzero(cs.sizes < threshold) + 1
    if small.size == 0:
        return mask, StepOutcome.skip("nothing below threshold")
    keep = cs.label_grid > 0
    keep &= ~np.isin(cs.label_grid, small)
    removed = int(cs.sizes[small - 1].sum())
    return mask.like(keep), StepOutcome(
        changed=True,
        voxels_removed=removed,
        notes=[f"removed {small.size} component(s) below {threshold} voxels"],
    )


def suppress_non_largest_components(mask: BinaryMask, keep_top: int = 2, conn: int = 26):
    """Keep the ``keep_top`` largest components and erase the rest."""
    if keep_top < 1:
        raise ValueError("keep_top must be at least 1")
    if mask.empty:
        return mask, StepOutcome.skip("empty mask")
    cs = label_components(mask, conn)
    if cs.count <= keep_top:
        return mask, StepOutcome.skip(f"{cs.count} component(s) <= keep_top={keep_top}")
    kept = (cs.label_grid > 0) & (cs.label_grid <= keep_top)
    removed = int(cs.sizes[keep_top:].sum())
    return mask.like(kept), StepOutcome(
        changed=True,
        voxels_removed=removed,
        notes=[f"suppressed {cs.count - keep_top} non-dominant component(s)"],
    )


# fragment merging -------------------------------------------------------------

def _first_voxel(comp: np.ndarray) -> int:
    return int(np.flatnonzero(comp.ravel())[0])


def _closest_component_pair(cs, spacing, d_merge, failed):
    comps = [cs.component(i) for i in range(1, cs.count + 1)]
    surfaces = [surface_voxels(c) for c in comps]
    best = None
    for i in range(cs.count):
        index = SurfaceIndex(comps[i], spacing)
        for j in range(i + 1, cs.count):
            key = frozenset((_first_voxel(comps[i]), _first_voxel(comps[j])))
            if key in failed:
                continue
            d = index.distance_to(comps[j], surfaces[j])
            if d <= d_merge and (best is None or d < best[0]):
                best = (d, i, j, key)
    if best is None:
        return None
    _, i, j, key = best
    return comps[i], comps[j], key


def merge_fragmented_structure(mask: BinaryMask, d_merge: float = 10.0, r_bridge: float = 1,
                               conn: int = 26, forbidden: Optional[np.ndarray] = None):
    """Reconnect nearby fragments of one organ with thin straight bridges.

    Pairs are joined closest-first while any two components lie within
    ``d_merge`` mm. Bridge voxels in ``forbidden`` (typically other organs) are
    never claimed; a pair whose clipped bridge fails to connect is left apart.
    """
    if d_merge < 0 or r_bridge < 0:
        raise ValueError("d_merge and r_bridge must be non-negative")
    if mask.empty:
        return mask, StepOutcome.skip("empty mask")
    arr = mask.data.copy()
    failed = set()
    added = 0
    bridges = 0
    while True:
        cs = label_components(arr, conn)
        if cs.count < 2:
            break
        pair = _closest_component_pair(cs, mask.spacing, d_merge, failed)
        if pair is None:
            break
        a, b, key = pair
        p, q, _ = closest_voxel_pair(a, b, mask.spacing)
        bridge = bridge_segment(p, q, r_bridge, arr.shape).data
        if forbidden is not None:
            bridge = bridge & ~forbidden
        joined = a | b | bridge
        if label_components(joined, conn).count != 1:
            failed.add(key)
            continue
        new = bridge & ~arr
        added += int(new.sum())
        bridges += 1
        arr |= new

    if bridges == 0:
        return mask, StepOutcome.skip("no fragments within merge distance")
    return mask.like(arr), StepOutcome(
        changed=True,
        voxels_added=added,
        notes=[f"joined {bridges} fragment pair(s)"],
    )


# false-positive reassignment -----------------------------------------------------

def reassign_false_positives(segmentation, adjacency: Mapping[str, Sequence[str]],
                             check_size_threshold: int = 500, conn: int = 26, schema=None):
    """Move small stray components to the adjacent organ whose body is nearer.

    ``segmentation`` is either a mapping of organ name to mask or a
    :class:`SegmentationCase` (then ``schema`` is needed to rebuild the label
    volume). A component of organ X moves to a neighbour Y only when it is
    smaller than ``check_size_threshold`` voxels, is not X's largest component,
    and lies strictly closer to Y's largest component than to X's. All
    decisions are taken on the input state, so the result does not depend on
    the order of organs.
    """
    as_case = isinstance(segmentation, SegmentationCase)
    masks: Dict[str, BinaryMask] = dict(segmentation.organs if as_case else segmentation)
    for organ, neighbours in adjacency.items():
        for other in [organ, *neighbours]:
            if other not in masks:
                raise UnknownOrgan(f"adjacency references unknown organ {other!r}")
        if organ in neighbours:
            raise ValueError(f"organ {organ!r} lists itself as adjacent")

    labelled = {}

    def components(name):
        if name not in labelled:
            labelled[name] = label_components(masks[name], conn)
        return labelled[name]

    dominant_index = {}

    def dominant(name):
        if name not in dominant_index:
            cs = components(name)
            dominant_index[name] = SurfaceIndex(cs.component(1), masks[name].spacing) if cs.count else None
        return dominant_index[name]

    moves = []  # (source, target, component array, size)
    for organ, neighbours in adjacency.items():
        if masks[organ].empty or not neighbours:
            continue
        cs = components(organ)
        if cs.count < 2:
            continue
        for cid in range(2, cs.count + 1):
            size = int(cs.sizes[cid - 1])
            if size >= check_size_threshold:
                continue
            comp = cs.component(cid)
            pts = surface_voxels(comp)
            d_own = dominant(organ).distance_to(comp, pts)
            best_target, best_d = None, d_own
            for other in neighbours:
                index = dominant(other)
                if index is None:
                    continue
                d = index.distance_to(comp, pts)
                if d < best_d:
                    best_target, best_d = other, d
            if best_target is not None:
                moves.append((organ, best_target, comp, size, d_own, best_d))

    if not moves:
        outcome = StepOutcome.skip("no misassigned components")
        return (segmentation if as_case else masks), outcome

    work = {name: m.data.copy() for name, m in masks.items()}
    notes = []
    moved = 0
    for src, dst, comp, size, d_own, d_new in moves:
        work[src] &= ~comp
        work[dst] |= comp
        moved += size
        notes.append(f"{src} component ({size} vx) -> {dst} ({d_new:.1f} mm vs {d_own:.1f} mm)")
    out = {
        name: (masks[name].like(arr) if name in {m[0] for m in moves} | {m[1] for m in moves}
               else masks[name])
        for name, arr in work.items()
    }
    outcome = StepOutcome(changed=True, voxels_relabeled=moved, notes=notes)
    if as_case:
        if schema is None:
            raise ValueError("schema is required to rebuild a SegmentationCase")
        return with_organs(segmentation, out, schema), outcome
    return out, outcome


# laterality ------------------------------------------------------------------------

def _axis_coords(arr: np.ndarray, axis: int) -> np.ndarray:
    other = tuple(a for a in range(3) if a != axis)
    return arr.sum(axis=other)


def _mean_along(arr: np.ndarray, axis: int) -> float:
    hist = _axis_coords(arr, axis)
    total = hist.sum()
    if total == 0:
        return float("nan")
    return float((hist * np.arange(hist.size)).sum() / total)


def split_right_left(mask: BinaryMask, axis: int = 0, merged_split_fraction: float = 0.6,
                     conn: int = 26):
    """Partition a paired-organ mask into provisional (right, left) halves.

    Lower coordinates along ``axis`` are provisionally "right"; the liver
    check settles the final sides. With two or more components the dividing
    plane sits at the mean foreground coordinate and each component goes to the
    side its own mean falls on, except a component that straddles the plane
    and holds more than ``merged_split_fraction`` of the voxels, which is cut
    voxelwise. A lone component is cut at its own mean only if it straddles
    the grid centre; otherwise it is kept whole on the side of the centre it
    occupies.
    """
    if mask.empty:
        raise EmptyMask("split_right_left needs a non-empty mask")
    arr = mask.data
    coord = np.arange(arr.shape[axis]).reshape([-1 if a == axis else 1 for a in range(3)])
    cs = label_components(mask, conn)
    right = np.zeros(arr.shape, dtype=bool)
    left = np.zeros(arr.shape, dtype=bool)

    if cs.count == 1:
        st = cs.stats[0]
        lo, hi = st.bbox[0][axis], st.bbox[1][axis]
        centre = (arr.shape[axis] - 1) / 2.0
        if lo < centre < hi:
            mid = st.centroid[axis]
            right = arr & (coord < mid)
            left = arr & (coord >= mid)
        elif st.centroid[axis] < centre:
            right = arr.copy()
        else:
            left = arr.copy()
        return mask.like(right), mask.like(left)

    midline = _mean_along(arr, axis)
    for cid, st in enumerate(cs.stats, start=1):
        comp = cs.label_grid == cid
        lo, hi = st.bbox[0][axis], st.bbox[1][axis]
        if lo < midline < hi and st.size > merged_split_fraction * mask.count:
            right |= comp & (coord < midline)
            left |= comp & (coord >= midline)
        elif st.centroid[axis] < midline:
            right |= comp
        else:
            left |= comp
    return mask.like(right), mask.like(left)


def reassign_left_right_based_on_liver(right: BinaryMask, left: BinaryMask, liver: BinaryMask,
                                       axis: Optional[int] = None):
    """Swap the two sides when the "left" mask sits nearer the liver.

    Distances are measured between centroids along the lateral axis; an empty
    side counts as infinitely far. Ties keep the input assignment.
    """
    if axis is None:
        axis = lateral_axis(liver.orientation, 0)
    if liver.empty:
        return right, left, StepOutcome(changed=False, notes=["liver missing"], skipped=True)
    ref = _mean_along(liver.data, axis)
    d_right = abs(_mean_along(right.data, axis) - ref) if not right.empty else float("inf")
    d_left = abs(_mean_along(left.data, axis) - ref) if not left.empty else float("inf")
    if d_left < d_right:
        return left, right, StepOutcome(
            changed=True,
            voxels_relabeled=right.count + left.count,
            notes=[f"swapped sides ({d_left:.1f} < {d_right:.1f} voxels from liver)"],
        )
    return right, left, StepOutcome.skip("sides consistent with liver")
