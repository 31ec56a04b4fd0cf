"""Organ schema: label ids, pairing and per-organ correction parameters."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, Optional, Tuple

import yaml

from .errors import SchemaError, UnknownOrgan

SIDES = ("right", "left")


@dataclass(frozen=True)
class OrganSpec:
    name: str
    label_id: Optional[int] = None
    paired: bool = False
    pair_sides: Optional[Tuple[int, int]] = None  # (right_label, left_label)
    keep_top: Optional[int] = 1  # None means no limit
    min_component_voxels: int = 0
    mergeable: bool = False
    adjacency: Tuple[str, ...] = ()
    connectivity: Optional[int] = None

    def mask_names(self):
        if self.paired:
            return (f"{self.name}_right", f"{self.name}_left")
        return (self.name,)

    def labels(self):
        return tuple(self.pair_sides) if self.paired else (self.label_id,)


@dataclass(frozen=True)
class OrganSchema:
    organs: Tuple[OrganSpec, ...]
    version: int = 1

    def __post_init__(self):
        names = [o.name for o in self.organs]
        if len(set(names)) != len(names):
            raise SchemaError("organ names must be unique")
        seen = {}
        for o in self.organs:
            if o.paired:
                if o.pair_sides is None or len(o.pair_sides) != 2:
                    raise SchemaError(f"paired organ {o.name!r} must declare right and left labels")
            elif o.pair_sides is not None:
                raise SchemaError(f"unpaired organ {o.name!r} must not declare side labels")
            elif o.label_id is None:
                raise SchemaError(f"organ {o.name!r} needs a label id")
            for lab in o.labels():
                if not isinstance(lab, int) or lab <= 0:
                    raise SchemaError(f"organ {o.name!r} has invalid label {lab!r}")
                if lab in seen:
                    raise SchemaError(f"label {lab} used by both {seen[lab]!r} and {o.name!r}")
                seen[lab] = o.name
            if o.keep_top is not None and o.keep_top < 1:
                raise SchemaError(f"organ {o.name!r}: keep_top must be >= 1")
            if o.min_component_voxels < 0:
                raise SchemaError(f"organ {o.name!r}: min_component_voxels must be >= 0")
            if o.name in o.adjacency:
                raise SchemaError(f"organ {o.name!r} lists itself as adjacent")
            for other in o.adjacency:
                if other not in names:
                    raise UnknownOrgan(f"organ {o.name!r} is adjacent to unknown organ {other!r}")
            if o.connectivity not in (None, 6, 18, 26):
                raise SchemaError(f"organ {o.name!r}: connectivity must be 6, 18 or 26")

    def __contains__(self, name):
        return any(o.name == name for o in self.organs)

    def get(self, name) -> OrganSpec:
        for o in self.organs:
            if o.name == name:
                return o
        raise UnknownOrgan(f"organ {name!r} is not in the schema")

    @property
    def names(self):
        return [o.name for o in self.organs]

    def mask_labels(self) -> Dict[str, int]:
        """Ordered map from mask name to label id (paired organs expand to two sides)."""
        out = {}
        for o in self.organs:
            for mask_name, lab in zip(o.mask_names(), o.labels()):
                out[mask_name] = lab
        return out

    def organ_of_mask(self, mask_name) -> OrganSpec:
        for o in self.organs:
            if mask_name in o.mask_names():
                return o
        raise UnknownOrgan(f"mask {mask_name!r} does not belong to any schema organ")

    def to_dict(self) -> dict:
        organs = []
        for o in self.organs:
            entry = {"name": o.name}
            if o.paired:
                entry["paired"] = True
                entry["sides"] = {"right": o.pair_sides[0], "left": o.pair_sides[1]}
            else:
                entry["label"] = o.label_id
            entry["keep_top"] = o.keep_top
            entry["min_component_voxels"] = o.min_component_voxels
            entry["mergeable"] = o.mergeable
            entry["adjacency"] = list(o.adjacency)
            if o.connectivity is not None:
                entry["connectivity"] = o.connectivity
            organs.append(entry)
        return {"version": self.version, "organs": organs}

    @classmethod
    def from_dict(cls, doc) -> "OrganSchema":
        if not isinstance(doc, dict) or "organs" not in doc:
            raise SchemaError("schema document needs an 'organs' list")
        allowed = {"name", "label", "paired", "sides", "keep_top",
                   "min_component_voxels", "mergeable", "adjacency", "connectivity"}
        organs = []
        for entry in doc["organs"]:
            extra = set(entry) - allowed
            if extra:
                raise SchemaError(f"unknown schema keys for {entry.get('name')!r}: {sorted(extra)}")
            paired = bool(entry.get("paired", False))
            sides = entry.get("sides")
            if sides is not None:
                try:
                    sides = (int(sides["right"]), int(sides["left"]))
                except (KeyError, TypeError) as exc:
                    raise SchemaError(f"organ {entry.get('name')!r}: sides need right and left") from exc
            label = entry.get("label")
            organs.append(OrganSpec(
                name=str(entry["name"]),
                label_id=None if label is None else int(label),
                paired=paired,
                pair_sides=sides,
                keep_top=entry.get("keep_top", 2 if paired else 1),
                min_component_voxels=int(entry.get("min_component_voxels", 0)),
                mergeable=bool(entry.get("mergeable", False)),
                adjacency=tuple(entry.get("adjacency", ()) or ()),
                connectivity=entry.get("connectivity"),
            ))
        return cls(tuple(organs), int(doc.get("version", 1)))


def load_schema(path=None) -> OrganSchema:
    """Read a YAML schema; with no path, the bundled reference schema."""
    if path is None:
        text = resources.files("maskrepair").joinpath("data/reference_schema.yaml").read_text()
    else:
        text = Path(path).read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SchemaError(f"cannot parse schema: {exc}") from exc
    return OrganSchema.from_dict(doc)


def reference_schema() -> OrganSchema:
    return load_schema(None)
