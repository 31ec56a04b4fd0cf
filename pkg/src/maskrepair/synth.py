"""Synthetic abdominal phantoms and controlled shape-error injection.

Phantoms are schematic: ellipsoids and tubes placed in normalised coordinates
with a seeded jitter. Axis 0 runs right to left (low index = patient right),
axis 1 anterior to posterior and axis 2 inferior to superior. Injectors corrupt
a phantom with exactly one error class each and keep the clean phantom as
ground truth.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import yaml
from scipy import ndimage

from .config import PipelineConfig
from .errors import DimsTooSmall, RecipeInfeasible
from .morphology import label_components, min_surface_distance, surface_voxels
from .schema import OrganSchema, reference_schema
from .volume import BinaryMask, LabelVolume, SegmentationCase, decompose

ORIENTATION = ("LR", "AP", "SI")
MIN_DIM = 32

# name -> list of primitives in normalised coordinates; paired organs list both sides
_LAYOUT = {
    "liver": [("ellipsoid", (0.30, 0.50, 0.60), (0.17, 0.20, 0.10))],
    "spleen": [("ellipsoid", (0.76, 0.62, 0.60), (0.08, 0.08, 0.07))],
    "stomach": [("ellipsoid", (0.60, 0.34, 0.58), (0.10, 0.08, 0.08))],
    "gall_bladder": [("ellipsoid", (0.36, 0.24, 0.52), (0.06, 0.06, 0.08))],
    "pancreas": [("tube", ((0.42, 0.46, 0.42), (0.72, 0.46, 0.45)), 0.035)],
    "kidney_right": [("ellipsoid", (0.30, 0.76, 0.40), (0.06, 0.05, 0.09))],
    "kidney_left": [("ellipsoid", (0.70, 0.76, 0.40), (0.06, 0.05, 0.09))],
    "lung_right": [("ellipsoid", (0.28, 0.50, 0.85), (0.15, 0.22, 0.10))],
    "lung_left": [("ellipsoid", (0.72, 0.50, 0.85), (0.15, 0.22, 0.10))],
    "colon": [("tube", ((0.18, 0.32, 0.12), (0.18, 0.32, 0.36), (0.82, 0.32, 0.36),
                        (0.82, 0.32, 0.12)), 0.035)],
    "intestine": [("ellipsoid", (0.50, 0.40, 0.21), (0.14, 0.10, 0.07))],
}


@dataclass
class Phantom:
    clean: SegmentationCase
    seed: int
    geometry: Dict[str, dict]
    schema: OrganSchema


def _grid(dims):
    return [((np.arange(n) + 0.5) / n).reshape([-1 if a == i else 1 for a in range(3)])
            for i, n in enumerate(dims)]


def _ellipsoid(u, centre, radii):
    return sum(((u[i] - centre[i]) / radii[i]) ** 2 for i in range(3)) <= 1.0


def _tube(u, points, radius):
    out = None
    for a, b in zip(points[:-1], points[1:]):
        a, b = np.asarray(a, float), np.asarray(b, float)
        ab = b - a
        t = sum((u[i] - a[i]) * ab[i] for i in range(3)) / float(ab @ ab)
        t = np.clip(t, 0.0, 1.0)
        d2 = sum((u[i] - a[i] - t * ab[i]) ** 2 for i in range(3))
        hit = d2 <= radius ** 2
        out = hit if out is None else out | hit
    return out


def _jitter(rng, prims):
    shift = rng.uniform(-0.012, 0.012, size=3)
    scale = rng.uniform(0.93, 1.07)
    out = []
    for kind, where, size in prims:
        if kind == "ellipsoid":
            out.append((kind, tuple(float(c) for c in np.asarray(where) + shift),
                        tuple(float(r * scale) for r in size)))
        else:
            pts = tuple(tuple(float(c) for c in np.asarray(p) + shift) for p in where)
            out.append((kind, pts, float(size * scale)))
    return out


def clean_problems(case: SegmentationCase, schema: OrganSchema, conn: int = 26) -> List[str]:
    """Reasons a case is not error-free in the phantom sense (empty list if clean)."""
    problems = []
    for organ in schema.organs:
        for name in organ.mask_names():
            mask = case.mask(name)
            if mask.empty:
                continue
            n = label_components(mask, conn).count
            if n != 1:
                problems.append(f"{name} has {n} components")
    return problems


def generate_phantom(seed: int, dims=(64, 64, 64), spacing=(1.0, 1.0, 1.0),
                     schema: Optional[OrganSchema] = None) -> Phantom:
    """Deterministic multi-organ phantom for ``seed``."""
    dims = tuple(int(d) for d in (dims if np.ndim(dims) else (dims,) * 3))
    if len(dims) != 3 or min(dims) < MIN_DIM:
        raise DimsTooSmall(f"phantom dims must be >= {MIN_DIM} per axis, got {dims}")
    schema = schema or reference_schema()
    labels = schema.mask_labels()
    rng = np.random.default_rng(seed)
    u = _grid(dims)

    for _ in range(20):
        data = np.zeros(dims, dtype=np.int32)
        geometry = {}
        for name, prims in _LAYOUT.items():
            if name not in labels:
                continue
            prims = _jitter(rng, prims)
            shape = np.zeros(dims, dtype=bool)
            for kind, where, size in prims:
                shape |= _ellipsoid(u, where, size) if kind == "ellipsoid" else _tube(u, where, size)
            data[shape & (data == 0)] = labels[name]
            geometry[name] = {"primitives": [
                {"kind": k, "where": w, "size": s} for k, w, s in prims
            ]}
        volume = LabelVolume(data, spacing, ORIENTATION)
        case = decompose(volume, schema, case_id=f"phantom_{seed}", provenance="synthetic")
        if not clean_problems(case, schema):
            return Phantom(case, int(seed), geometry, schema)
    raise RecipeInfeasible(f"could not build a clean phantom for seed {seed}")


# injection recipes -----------------------------------------------------------------

@dataclass
class Artifact:
    count: int = 5
    size_range: Tuple[int, int] = (1, 5)
    organ: Optional[str] = None
    kind: str = field(default="artifact", init=False)


@dataclass
class FalsePositive:
    source: str
    target: str
    blob_size: int = 100
    kind: str = field(default="false_positive", init=False)


@dataclass
class Redundant:
    organ: str
    protrusion_size: int = 80
    kind: str = field(default="redundant", init=False)


@dataclass
class Fragment:
    organ: str
    gap_voxels: int = 3
    kind: str = field(default="fragment", init=False)


@dataclass
class LateralitySwap:
    organ: str
    kind: str = field(default="laterality_swap", init=False)


@dataclass
class LateralityMerge:
    organ: str
    kind: str = field(default="laterality_merge", init=False)


Injection = Union[Artifact, FalsePositive, Redundant, Fragment, LateralitySwap, LateralityMerge]
_KINDS = {cls.__dataclass_fields__["kind"].default: cls
          for cls in (Artifact, FalsePositive, Redundant, Fragment, LateralitySwap, LateralityMerge)}


@dataclass
class InjectionRecipe:
    injections: List[Injection] = field(default_factory=list)
    seed: int = 0

    def to_dict(self) -> dict:
        items = []
        for inj in self.injections:
            d = asdict(inj)
            kind = d.pop("kind")
            if "size_range" in d:
                d["size_range"] = list(d["size_range"])
            items.append({"type": kind, **d})
        return {"seed": self.seed, "injections": items}

    @classmethod
    def from_dict(cls, doc) -> "InjectionRecipe":
        injections = []
        for item in (doc or {}).get("injections", []) or []:
            item = dict(item)
            kind = item.pop("type")
            if kind not in _KINDS:
                raise RecipeInfeasible(f"unknown injection type {kind!r}")
            if "size_range" in item:
                item["size_range"] = tuple(item["size_range"])
            injections.append(_KINDS[kind](**item))
        return cls(injections, int((doc or {}).get("seed", 0)))

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_yaml(cls, text: str) -> "InjectionRecipe":
        return cls.from_dict(yaml.safe_load(text))


class _Scene:
    """Mutable label masks of a case being corrupted."""

    def __init__(self, case: SegmentationCase, schema: OrganSchema, config: PipelineConfig):
        self.schema = schema
        self.config = config
        self.spacing = case.spacing
        self.orientation = case.orientation
        self.dims = case.dims
        self.masks = {name: case.mask(name).data.copy() for name in schema.mask_labels()}
        self.case_id = case.case_id
        self.provenance = case.provenance

    def occupied(self, exclude=()):
        out = np.zeros(self.dims, dtype=bool)
        for name, m in self.masks.items():
            if name not in exclude:
                out |= m
        return out

    def organ_masks(self, organ_name):
        organ = self.schema.get(organ_name)
        return organ, organ.mask_names()

    def union(self, organ_name):
        _, names = self.organ_masks(organ_name)
        out = np.zeros(self.dims, dtype=bool)
        for n in names:
            out |= self.masks[n]
        return out

    def to_case(self) -> SegmentationCase:
        data = np.zeros(self.dims, dtype=np.int32)
        for name, lab in self.schema.mask_labels().items():
            data[self.masks[name]] = lab
        volume = LabelVolume(data, self.spacing, self.orientation)
        return decompose(volume, self.schema, case_id=self.case_id, provenance=self.provenance)


def _mask_name_for(scene: _Scene, organ_name: str, rng) -> str:
    organ = scene.schema.organ_of_mask(organ_name) if organ_name not in scene.schema else scene.schema.get(organ_name)
    names = [n for n in organ.mask_names() if scene.masks[n].any()] or list(organ.mask_names())
    if organ_name in organ.mask_names():
        return organ_name
    return names[int(rng.integers(len(names)))]


def _inject_artifact(scene: _Scene, inj: Artifact, rng) -> dict:
    lo, hi = int(inj.size_range[0]), int(inj.size_range[1])
    if lo < 1 or hi < lo:
        raise RecipeInfeasible(f"bad artifact size range {inj.size_range}")
    if inj.organ is not None:
        candidates = [_mask_name_for(scene, inj.organ, rng)]
    else:
        candidates = [
            n for n, m in scene.masks.items()
            if m.any() and scene.schema.organ_of_mask(n).min_component_voxels > hi
        ]
    if not candidates:
        raise RecipeInfeasible("no organ has a removal threshold above the artifact size")
    placed = []
    for _ in range(inj.count):
        occupied = scene.occupied()
        clearance = ndimage.distance_transform_edt(~occupied)
        ok = np.argwhere(clearance >= hi + 2)
        if len(ok) == 0:
            raise RecipeInfeasible("no free space for artifacts")
        seed = ok[int(rng.integers(len(ok)))]
        size = int(rng.integers(lo, hi + 1))
        cluster = {tuple(seed)}
        while len(cluster) < size:
            base = list(sorted(cluster))[int(rng.integers(len(cluster)))]
            axis = int(rng.integers(3))
            step = 1 if rng.random() < 0.5 else -1
            nxt = list(base)
            nxt[axis] += step
            if all(0 <= c < d for c, d in zip(nxt, scene.dims)):
                cluster.add(tuple(nxt))
        name = candidates[int(rng.integers(len(candidates)))]
        pts = np.array(sorted(cluster))
        scene.masks[name][tuple(pts.T)] = True
        placed.append({"organ": name, "size": len(cluster), "seed": [int(c) for c in seed]})
    return {"type": "artifact", "clusters": placed}


def _inject_false_positive(scene: _Scene, inj: FalsePositive, rng) -> dict:
    src = _mask_name_for(scene, inj.source, rng)
    dst = _mask_name_for(scene, inj.target, rng)
    if src == dst:
        raise RecipeInfeasible("false positive source and target must differ")
    conn = scene.config.connectivity
    src_min = scene.schema.organ_of_mask(src).min_component_voxels
    if not src_min <= inj.blob_size < scene.config.check_size_threshold:
        raise RecipeInfeasible(
            f"blob size {inj.blob_size} outside [{src_min}, {scene.config.check_size_threshold})")
    target = scene.masks[dst]
    source = scene.masks[src]
    if not target.any() or not source.any():
        raise RecipeInfeasible("false positive needs non-empty source and target")
    sp = np.asarray(scene.spacing)
    blob_radius = (3.0 * inj.blob_size / (4.0 * np.pi)) ** (1.0 / 3.0)
    surf = surface_voxels(target)
    src_dist = ndimage.distance_transform_edt(~source, sampling=scene.spacing)
    d_surf = src_dist[tuple(surf.T)]
    # face the source organ, but keep the blob well clear of it
    margin = (2.0 * blob_radius + 3.0) * sp.max()
    order = np.argsort(d_surf, kind="stable")
    order = order[d_surf[order] >= margin]
    if len(order) == 0:
        raise RecipeInfeasible("target has no surface far enough from the source")
    coords = np.argwhere(target)
    n_target = len(coords)
    tries = order[: max(8, len(order) // 10)]
    for idx in rng.permutation(tries)[:12]:
        centre = surf[idx]
        d2 = (((coords - centre) * sp) ** 2).sum(axis=1)
        pick = coords[np.lexsort((np.arange(n_target), d2))[: inj.blob_size]]
        blob = np.zeros(scene.dims, dtype=bool)
        blob[tuple(pick.T)] = True
        rest = target & ~blob
        if label_components(blob, conn).count != 1 or label_components(rest, conn).count != label_components(target, conn).count:
            continue
        merged = source | blob
        if label_components(merged, conn).count != label_components(source, conn).count + 1:
            continue
        if min_surface_distance(blob, source, scene.spacing) <= min_surface_distance(blob, rest, scene.spacing):
            continue
        scene.masks[dst] = rest
        scene.masks[src] = merged
        return {"type": "false_positive", "source": src, "target": dst,
                "blob_size": int(inj.blob_size), "centre": [int(c) for c in centre]}
    raise RecipeInfeasible(f"could not place a false positive blob from {dst} into {src}")


def _inject_redundant(scene: _Scene, inj: Redundant, rng) -> dict:
    organ = scene.schema.get(inj.organ) if inj.organ in scene.schema else scene.schema.organ_of_mask(inj.organ)
    name = _mask_name_for(scene, inj.organ, rng)
    conn = scene.config.connectivity
    body = scene.union(organ.name)
    if not body.any():
        raise RecipeInfeasible(f"{organ.name} is empty")
    sizes = [label_components(scene.masks[n], conn).sizes for n in organ.mask_names() if scene.masks[n].any()]
    smallest_kept = min(int(s[0]) for s in sizes)
    if inj.protrusion_size >= smallest_kept:
        raise RecipeInfeasible("redundant lobe must be smaller than the organ's kept components")
    sp = np.asarray(scene.spacing)
    gap_mm = 2.0 * sp.max()
    if organ.mergeable:
        gap_mm = max(gap_mm, scene.config.d_merge + 2.0 * sp.max())
    lobe_radius = (3.0 * inj.protrusion_size / (4.0 * np.pi)) ** (1.0 / 3.0)

    occupied = scene.occupied()
    free = ~occupied
    body_dist = ndimage.distance_transform_edt(~body, sampling=scene.spacing)
    others = occupied & ~body
    other_dist = ndimage.distance_transform_edt(~others, sampling=scene.spacing) if others.any() else None
    surf = surface_voxels(body)
    centroid = np.argwhere(body).mean(axis=0)
    dims = np.array(scene.dims)
    for idx in rng.permutation(len(surf))[:60]:
        p = surf[idx].astype(float)
        direction = (p - centroid) * sp
        norm = np.linalg.norm(direction)
        if norm == 0:
            continue
        direction /= norm
        centre = p + direction * (gap_mm + (lobe_radius + 1.5) * sp.max()) / sp
        c = np.round(centre).astype(int)
        if np.any(c < 0) or np.any(c >= dims):
            continue
        r = int(np.ceil(lobe_radius + 3))
        lo = np.maximum(c - r, 0)
        hi = np.minimum(c + r + 1, dims)
        box = tuple(slice(a, b) for a, b in zip(lo, hi))
        local = np.argwhere(free[box] & (body_dist[box] >= gap_mm)) + lo
        if len(local) < inj.protrusion_size:
            continue
        d2 = (((local - c) * sp) ** 2).sum(axis=1)
        pick = local[np.lexsort((np.arange(len(local)), d2))[: inj.protrusion_size]]
        lobe = np.zeros(scene.dims, dtype=bool)
        lobe[tuple(pick.T)] = True
        if label_components(lobe, conn).count != 1:
            continue
        d_body = body_dist[lobe].min()
        if other_dist is not None and other_dist[lobe].min() <= d_body + 2.0 * sp.max():
            continue
        scene.masks[name] |= lobe
        return {"type": "redundant", "organ": name, "size": int(inj.protrusion_size),
                "centre": [int(v) for v in c]}
    raise RecipeInfeasible(f"could not place a redundant lobe for {inj.organ}")


def _inject_fragment(scene: _Scene, inj: Fragment, rng) -> dict:
    name = _mask_name_for(scene, inj.organ, rng)
    conn = scene.config.connectivity
    mask = scene.masks[name]
    if label_components(mask, conn).count != 1:
        raise RecipeInfeasible(f"{name} must be a single component before fragmenting")
    sp = np.asarray(scene.spacing)
    if (inj.gap_voxels + 1) * sp.max() > scene.config.d_merge:
        raise RecipeInfeasible("fragment gap exceeds the merge distance")
    organ = scene.schema.organ_of_mask(name)
    min_piece = max(organ.min_component_voxels, 1)
    neighbours = np.zeros(scene.dims, dtype=bool)
    for other in organ.adjacency:
        neighbours |= scene.union(other)
    coords = np.argwhere(mask)
    centred = (coords - coords.mean(axis=0)) * sp
    _, _, vt = np.linalg.svd(centred, full_matrices=False)
    axis = vt[0] / np.abs(vt[0]).max()  # unit step along the dominant voxel axis
    proj = centred @ vt[0] / (np.abs(vt[0] * sp).max())
    proj = np.round(coords @ axis).astype(int)
    lo_q, hi_q = np.quantile(proj, [0.3, 0.7])
    starts = np.arange(int(np.floor(lo_q)), int(np.ceil(hi_q)) + 1)
    for start in rng.permutation(starts):
        cut = (proj >= start) & (proj < start + inj.gap_voxels)
        if not cut.any():
            continue
        slab = np.zeros(scene.dims, dtype=bool)
        slab[tuple(coords[cut].T)] = True
        rest = mask & ~slab
        cs = label_components(rest, conn)
        if cs.count != 2 or cs.sizes.min() < min_piece:
            continue
        d_own = min_surface_distance(cs.component(1), cs.component(2), scene.spacing)
        if d_own > scene.config.d_merge:
            continue
        # the smaller piece must not look like a false positive of a neighbour
        if neighbours.any() and min_surface_distance(cs.component(2), neighbours, scene.spacing) <= d_own:
            continue
        scene.masks[name] = rest
        return {"type": "fragment", "organ": name, "removed": int(slab.sum()),
                "slab_start": int(start)}
    raise RecipeInfeasible(f"could not fragment {name}")


def _inject_laterality(scene: _Scene, inj, rng) -> dict:
    organ = scene.schema.get(inj.organ)
    if not organ.paired:
        raise RecipeInfeasible(f"{inj.organ} is not a paired organ")
    r, l = organ.mask_names()
    if not (scene.masks[r].any() and scene.masks[l].any()):
        raise RecipeInfeasible(f"{inj.organ} needs both sides present")
    if isinstance(inj, LateralitySwap):
        scene.masks[r], scene.masks[l] = scene.masks[l], scene.masks[r]
        return {"type": "laterality_swap", "organ": organ.name}
    keep = r if rng.random() < 0.5 else l
    drop = l if keep == r else r
    scene.masks[keep] = scene.masks[keep] | scene.masks[drop]
    scene.masks[drop] = np.zeros(scene.dims, dtype=bool)
    return {"type": "laterality_merge", "organ": organ.name, "labelled_as": keep}


_INJECTORS = {
    "artifact": _inject_artifact,
    "false_positive": _inject_false_positive,
    "redundant": _inject_redundant,
    "fragment": _inject_fragment,
    "laterality_swap": _inject_laterality,
    "laterality_merge": _inject_laterality,
}


def inject_with_log(phantom: Phantom, recipe: InjectionRecipe, config: Optional[PipelineConfig] = None):
    """Like :func:`inject` but also returns one record per applied injection."""
    config = config or PipelineConfig()
    scene = _Scene(phantom.clean, phantom.schema, config)
    rng = np.random.default_rng(recipe.seed)
    records = []
    for inj in recipe.injections:
        records.append(_INJECTORS[inj.kind](scene, inj, rng))
    if not recipe.injections:
        return phantom.clean, phantom, records
    corrupted = scene.to_case()
    return corrupted, phantom, records


def inject(phantom: Phantom, recipe: InjectionRecipe, config: Optional[PipelineConfig] = None):
    """Corrupt ``phantom.clean`` per ``recipe``; returns ``(corrupted, ground_truth)``."""
    corrupted, truth, _ = inject_with_log(phantom, recipe, config)
    return corrupted, truth


ERROR_CLASSES = ("artifact", "false_positive", "redundant", "fragment", "laterality")


def _feasible(phantom: Phantom, inj, config: PipelineConfig, seed: int) -> bool:
    scene = _Scene(phantom.clean, phantom.schema, config)
    try:
        _INJECTORS[inj.kind](scene, inj, np.random.default_rng(seed))
    except RecipeInfeasible:
        return False
    return True


def random_recipe(phantom: Phantom, seed: int, classes: Sequence[str] = ERROR_CLASSES,
                  config: Optional[PipelineConfig] = None) -> InjectionRecipe:
    """One injection per requested class, parameters inside the correction envelope.

    Organs are drawn uniformly from those present in the phantom for which the
    schema can undo the class.
    """
    config = config or PipelineConfig()
    schema = phantom.schema
    rng = np.random.default_rng(seed)
    present = {n for n, m in phantom.clean.organs.items() if not m.empty}

    def pick(options):
        options = sorted(options)
        if not options:
            raise RecipeInfeasible("no eligible organ in the phantom")
        return options[int(rng.integers(len(options)))]

    injections: List[Injection] = []
    for cls in classes:
        if cls == "fragment":
            organ = pick(o.name for o in schema.organs
                         if o.mergeable and not o.paired and o.name in present)
            injections.append(Fragment(organ, int(rng.integers(2, 5))))
        elif cls == "redundant":
            organ = pick(o.name for o in schema.organs
                         if o.keep_top is not None and o.name != "pancreas"
                         and all(n in present for n in o.mask_names()))
            injections.append(Redundant(organ, int(rng.integers(25, 61))))
        elif cls == "false_positive":
            pairs = sorted((o.name, t) for o in schema.organs if not o.paired and o.name in present
                           for t in o.adjacency if t in present and not schema.get(t).paired)
            chosen = None
            for k in rng.permutation(len(pairs)):
                src, dst = pairs[k]
                floor = schema.get(src).min_component_voxels
                fp = FalsePositive(src, dst, int(rng.integers(max(30, floor + 5), 121)))
                if _feasible(phantom, fp, config, seed):
                    chosen = fp
                    break
            if chosen is None:
                raise RecipeInfeasible("no adjacent organ pair can host a false positive blob")
            injections.append(chosen)
        elif cls == "artifact":
            injections.append(Artifact(int(rng.integers(3, 7)), (1, 5)))
        elif cls in ("laterality", "laterality_swap", "laterality_merge"):
            organ = pick(o.name for o in schema.organs
                         if o.paired and all(n in present for n in o.mask_names()))
            if cls == "laterality_merge" or (cls == "laterality" and rng.random() < 0.3):
                injections.append(LateralityMerge(organ))
            else:
                injections.append(LateralitySwap(organ))
        else:
            raise ValueError(f"unknown error class {cls!r}")
    order = {"fragment": 0, "redundant": 1, "false_positive": 2, "artifact": 3}
    injections.sort(key=lambda i: order.get(i.kind, 4))
    return InjectionRecipe(injections, seed)


def sample_injection(phantom: Phantom, seed: int, classes: Sequence[str] = ERROR_CLASSES,
                     config: Optional[PipelineConfig] = None, attempts: int = 20):
    """Draw a random recipe and apply it: ``(corrupted, recipe)``.

    Recipe seeds are derived from ``seed`` and retried until one is feasible, so
    the result is still a pure function of the arguments.
    """
    config = config or PipelineConfig()
    for k in range(attempts):
        try:
            recipe = random_recipe(phantom, seed * 1000 + k, classes, config)
            corrupted, _ = inject(phantom, recipe, config)
            return corrupted, recipe
        except RecipeInfeasible:
            continue
    raise RecipeInfeasible(f"no feasible recipe for seed {seed} after {attempts} attempts")


def random_case(seed: int, classes: Sequence[str] = ERROR_CLASSES, dims=(64, 64, 64),
                spacing=(1.0, 1.0, 1.0), config: Optional[PipelineConfig] = None, attempts: int = 20):
    """Phantom plus a corrupted copy for ``seed``: ``(corrupted, phantom, recipe)``."""
    phantom = generate_phantom(seed, dims, spacing)
    corrupted, recipe = sample_injection(phantom, seed, classes, config, attempts)
    return corrupted, phantom, recipe
