"""Compile organ schemas and configs into rule plans, and apply them to cases.

A plan is a flat, ordered list of ``(step, scope, params)`` entries. The scope
of a paired organ is its name (meaning the union of both sides) whenever the
split step is enabled; otherwise each side is its own scope.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .config import STEPS, PipelineConfig
from .errors import MissingLiver, UnknownOrgan
from .schema import OrganSchema, OrganSpec
from .shape_ops import (
    StepOutcome,
    merge_fragmented_structure,
    reassign_false_positives,
    reassign_left_right_based_on_liver,
    remove_small_components,
    split_right_left,
    suppress_non_largest_components,
)
from .volume import BinaryMask, SegmentationCase, check_disjoint, lateral_axis, with_organs

log = logging.getLogger(__name__)

CASE_SCOPE = "*"
LIVER = "liver"


@dataclass(frozen=True)
class PlanStep:
    step: str
    scope: str
    params: Tuple[Tuple[str, object], ...] = ()

    @property
    def kw(self) -> dict:
        return dict(self.params)


@dataclass(frozen=True)
class RulePlan:
    steps: Tuple[PlanStep, ...]
    schema: OrganSchema
    lateral_axis_fallback: int = 0

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def lateralized(self) -> Tuple[str, ...]:
        """Paired organs processed as a union and re-split."""
        return tuple(s.scope for s in self.steps if s.step == "split_right_left")


def _params(**kw):
    return tuple(sorted(kw.items()))


def _scopes(organ: OrganSpec, lateralize: bool):
    if organ.paired and not lateralize:
        return organ.mask_names()
    return (organ.name,)


def compile_plan(schema: OrganSchema, config: PipelineConfig) -> RulePlan:
    """Turn a schema and config into a deterministic, canonically ordered plan."""
    for name in config.organ_overrides:
        if name not in schema:
            raise UnknownOrgan(f"config overrides unknown organ {name!r}")
    lateralize = config.enabled("split_right_left")
    paired = [o for o in schema.organs if o.paired]
    if paired and config.enabled("reassign_left_right_based_on_liver") and LIVER not in schema:
        raise MissingLiver("laterality validation needs a 'liver' organ in the schema")

    def setting(organ, key, default):
        over = config.organ_overrides.get(organ.name, {})
        if key in over:
            return over[key]
        value = getattr(organ, key, None)
        return default if value is None else value

    steps: List[PlanStep] = []
    for step in STEPS:
        if not config.enabled(step):
            continue
        if step == "reassign_false_positives":
            adjacency = []
            for organ in schema.organs:
                if not organ.adjacency:
                    continue
                targets = tuple(
                    s for other in organ.adjacency for s in _scopes(schema.get(other), lateralize)
                )
                for src in _scopes(organ, lateralize):
                    adjacency.append((src, targets))
            if adjacency:
                steps.append(PlanStep(step, CASE_SCOPE, _params(
                    adjacency=tuple(adjacency),
                    check_size_threshold=config.check_size_threshold,
                    conn=config.connectivity,
                )))
            continue

        for organ in schema.organs:
            conn = setting(organ, "connectivity", config.connectivity)
            scopes = _scopes(organ, lateralize)
            if step == "remove_small_components":
                threshold = setting(organ, "min_component_voxels", 0)
                if threshold > 0:
                    steps.extend(PlanStep(step, s, _params(threshold=threshold, conn=conn)) for s in scopes)
            elif step == "merge_fragmented_structure":
                if setting(organ, "mergeable", False):
                    params = _params(
                        d_merge=float(setting(organ, "d_merge", config.d_merge)),
                        r_bridge=setting(organ, "r_bridge", config.r_bridge),
                        conn=conn,
                    )
                    steps.extend(PlanStep(step, s, params) for s in scopes)
            elif step == "suppress_non_largest_components":
                keep_top = setting(organ, "keep_top", None)
                if organ.name == LIVER:
                    keep_top = 1
                elif organ.paired and not lateralize and keep_top is not None:
                    keep_top = max(1, keep_top // 2)
                if keep_top is not None:
                    steps.extend(PlanStep(step, s, _params(keep_top=keep_top, conn=conn)) for s in scopes)
            elif step == "split_right_left":
                if organ.paired:
                    steps.append(PlanStep(step, organ.name, _params(
                        fraction=config.merged_split_fraction, conn=conn)))
            elif step == "reassign_left_right_based_on_liver":
                if organ.paired:
                    steps.append(PlanStep(step, organ.name))
    return RulePlan(tuple(steps), schema, config.lateral_axis_fallback)


class _State:
    """Working masks of one case while a plan runs."""

    def __init__(self, case: SegmentationCase, plan: RulePlan):
        self.case = case
        self.schema = plan.schema
        self.lateralized = set(plan.lateralized())
        self.work: Dict[str, BinaryMask] = {}
        self.sides: Dict[str, Tuple[BinaryMask, BinaryMask]] = {}
        self.original: Dict[str, Tuple[BinaryMask, BinaryMask]] = {}
        owned = set()
        for organ in self.schema.organs:
            if organ.paired and organ.name in self.lateralized:
                r, l = (case.mask(n) for n in organ.mask_names())
                self.original[organ.name] = (r, l)
                self.work[organ.name] = r if l.empty else (l if r.empty else r.like(r.data | l.data))
            else:
                for n in organ.mask_names():
                    self.work[n] = case.mask(n)
            owned.update(organ.mask_names())
        self.passthrough = {k: v for k, v in case.organs.items() if k not in owned}

    def all_masks(self) -> Dict[str, BinaryMask]:
        masks = dict(self.work)
        masks.update(self.passthrough)
        return masks

    def others_union(self, scope: str) -> np.ndarray:
        out = np.zeros(self.case.dims, dtype=bool)
        for name, mask in self.all_masks().items():
            if name != scope and not mask.empty:
                out |= mask.data
        return out

    def side_masks(self, scope: str):
        if scope in self.sides:
            return self.sides[scope]
        if scope in self.lateralized:
            return self._distribute(scope)
        organ = self.schema.get(scope)
        return tuple(self.work[n] for n in organ.mask_names())

    def _distribute(self, scope: str):
        # split never ran: keep each voxel's input side, new voxels join the nearer side
        union = self.work[scope]
        r0, l0 = self.original[scope]
        right = union.data & r0.data
        left = union.data & l0.data
        new = union.data & ~(r0.data | l0.data)
        if new.any():
            axis = lateral_axis(union.orientation, 0)
            coords = np.argwhere(new)[:, axis]
            cr = np.argwhere(r0.data)[:, axis].mean() if r0.count else np.inf
            cl = np.argwhere(l0.data)[:, axis].mean() if l0.count else np.inf
            to_right = np.abs(coords - cr) <= np.abs(coords - cl)
            pts = np.argwhere(new)
            right[tuple(pts[to_right].T)] = True
            left[tuple(pts[~to_right].T)] = True
        if np.array_equal(right, r0.data) and np.array_equal(left, l0.data):
            return r0, l0
        return union.like(right), union.like(left)

    def final_organs(self) -> Dict[str, BinaryMask]:
        out: Dict[str, BinaryMask] = {}
        resolved = {}
        for organ in self.schema.organs:
            if organ.paired and organ.name in self.lateralized:
                r, l = self.side_masks(organ.name)
                resolved[organ.mask_names()[0]] = r
                resolved[organ.mask_names()[1]] = l
            else:
                for n in organ.mask_names():
                    resolved[n] = self.work[n]
        for name in self.case.organs:
            out[name] = resolved.get(name, self.passthrough.get(name))
        return out


def _run_step(state: _State, ps: PlanStep, axis: int) -> StepOutcome:
    kw = ps.kw
    work = state.work
    if ps.step == "remove_small_components":
        work[ps.scope], outcome = remove_small_components(work[ps.scope], kw["threshold"], kw["conn"])
    elif ps.step == "suppress_non_largest_components":
        work[ps.scope], outcome = suppress_non_largest_components(work[ps.scope], kw["keep_top"], kw["conn"])
    elif ps.step == "merge_fragmented_structure":
        work[ps.scope], outcome = merge_fragmented_structure(
            work[ps.scope], kw["d_merge"], kw["r_bridge"], kw["conn"],
            forbidden=state.others_union(ps.scope),
        )
    elif ps.step == "reassign_false_positives":
        adjacency = {src: list(targets) for src, targets in kw["adjacency"]}
        masks, outcome = reassign_false_positives(
            dict(work), adjacency, kw["check_size_threshold"], kw["conn"]
        )
        work.update(masks)
    elif ps.step == "split_right_left":
        union = work[ps.scope]
        if union.empty:
            return StepOutcome.skip("empty mask")
        right, left = split_right_left(union, axis, kw["fraction"], kw["conn"])
        r0, l0 = state.original[ps.scope]
        moved = int(np.count_nonzero(right.data & l0.data) + np.count_nonzero(left.data & r0.data))
        if right == r0 and left == l0:
            right, left = r0, l0
        state.sides[ps.scope] = (right, left)
        if moved == 0:
            return StepOutcome.skip("sides already consistent with the split")
        outcome = StepOutcome(changed=True, voxels_relabeled=moved,
                              notes=[f"{moved} voxel(s) changed side"])
    elif ps.step == "reassign_left_right_based_on_liver":
        right, left = state.side_masks(ps.scope)
        if right.empty and left.empty:
            return StepOutcome.skip("empty mask")
        right, left, outcome = reassign_left_right_based_on_liver(right, left, work[LIVER], axis)
        if ps.scope in state.lateralized:
            state.sides[ps.scope] = (right, left)
        else:
            names = state.schema.get(ps.scope).mask_names()
            work[names[0]], work[names[1]] = right, left
    else:
        raise ValueError(f"unknown step {ps.step!r}")
    return outcome


def apply_organ_rules(case: SegmentationCase, plan: RulePlan):
    """Run ``plan`` on ``case``.

    Returns the corrected case and a list of ``(step, scope, StepOutcome)``.
    A failing step stops the remaining steps of its scope only and leaves that
    scope at its last valid state.
    """
    if not plan.steps:
        return case, []
    state = _State(case, plan)
    axis = lateral_axis(case.orientation, plan.lateral_axis_fallback)
    failed = set()
    outcomes = []
    for ps in plan.steps:
        if ps.scope in failed:
            outcomes.append((ps.step, ps.scope, StepOutcome.skip("earlier step failed")))
            continue
        saved_work, saved_sides = dict(state.work), dict(state.sides)
        try:
            outcome = _run_step(state, ps, axis)
            check_disjoint(state.all_masks())
        except Exception as exc:  # degrade per organ, never per case
            log.warning("case %s: %s on %s failed: %s", case.case_id, ps.step, ps.scope, exc)
            state.work, state.sides = saved_work, saved_sides
            failed.add(ps.scope)
            outcome = StepOutcome(changed=False, notes=[f"error: {type(exc).__name__}: {exc}"])
        outcomes.append((ps.step, ps.scope, outcome))

    organs = state.final_organs()
    # equal content means untouched: keep the input objects so no-op runs return ``case``
    organs = {k: case.organs[k] if m == case.organs[k] else m for k, m in organs.items()}
    if all(organs[k] is case.organs[k] for k in case.organs):
        return case, outcomes
    return with_organs(case, organs, plan.schema), outcomes
