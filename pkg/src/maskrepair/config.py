"""Pipeline configuration loaded from YAML with environment overrides.

Keys (all optional)::

    enabled_steps:            list of step names (default: every step)
    defaults:
      connectivity:           6, 18 or 26 (default 26)
      check_size_threshold:   voxels; larger components are never reassigned (500)
      d_merge:                mm; fragments closer than this are bridged (10.0)
      r_bridge:               voxels; bridge thickness radius (1)
      lateral_axis_fallback:  axis used when orientation is unknown (0)
      merged_split_fraction:  share of a paired mask a straddling component
                              must hold before it is cut at the midline (0.6)
    organs:                   per-organ overrides of keep_top,
                              min_component_voxels, mergeable, connectivity,
                              d_merge, r_bridge
    workers:                  worker processes for batches (1)
    strict_labels:            reject labels missing from the schema (false)
    report_format:            csv or json (csv)
    log_level:                logging level name (INFO)

Environment: ``MASKREPAIR_WORKERS`` and ``MASKREPAIR_LOG_LEVEL`` override the
file values.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, Optional, Tuple

import yaml

from .errors import ConfigError, UnknownStep

STEPS = (
    "remove_small_components",
    "reassign_false_positives",
    "merge_fragmented_structure",
    "suppress_non_largest_components",
    "split_right_left",
    "reassign_left_right_based_on_liver",
)

ORGAN_OVERRIDE_KEYS = {"keep_top", "min_component_voxels", "mergeable", "connectivity", "d_merge", "r_bridge"}
_DEFAULT_KEYS = {"connectivity", "check_size_threshold", "d_merge", "r_bridge",
                 "lateral_axis_fallback", "merged_split_fraction"}
_TOP_KEYS = {"version", "enabled_steps", "defaults", "organs", "workers",
             "strict_labels", "report_format", "log_level"}


@dataclass(frozen=True)
class PipelineConfig:
    enabled_steps: Tuple[str, ...] = STEPS
    connectivity: int = 26
    check_size_threshold: int = 500
    d_merge: float = 10.0
    r_bridge: float = 1
    lateral_axis_fallback: int = 0
    merged_split_fraction: float = 0.6
    organ_overrides: Dict[str, dict] = field(default_factory=dict)
    workers: int = 1
    strict_labels: bool = False
    report_format: str = "csv"
    log_level: str = "INFO"

    def __post_init__(self):
        unknown = [s for s in self.enabled_steps if s not in STEPS]
        if unknown:
            raise UnknownStep(f"unknown step(s): {unknown}")
        # canonical order regardless of how the file lists them
        object.__setattr__(self, "enabled_steps", tuple(s for s in STEPS if s in self.enabled_steps))
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.connectivity not in (6, 18, 26):
            raise ConfigError("connectivity must be 6, 18 or 26")
        for name in ("check_size_threshold", "d_merge", "r_bridge"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.lateral_axis_fallback not in (0, 1, 2):
            raise ConfigError("lateral_axis_fallback must be 0, 1 or 2")
        if not 0.0 <= self.merged_split_fraction <= 1.0:
            raise ConfigError("merged_split_fraction must lie in [0, 1]")
        if self.report_format not in ("csv", "json"):
            raise ConfigError("report_format must be csv or json")
        for organ, over in self.organ_overrides.items():
            extra = set(over) - ORGAN_OVERRIDE_KEYS
            if extra:
                raise ConfigError(f"unknown override key(s) for {organ!r}: {sorted(extra)}")

    def enabled(self, step: str) -> bool:
        return step in self.enabled_steps

    def to_dict(self) -> dict:
        d = asdict(self)
        return {
            "enabled_steps": list(self.enabled_steps),
            "defaults": {k: d[k] for k in sorted(_DEFAULT_KEYS)},
            "organs": d["organ_overrides"],
            "workers": self.workers,
            "strict_labels": self.strict_labels,
            "report_format": self.report_format,
            "log_level": self.log_level,
        }

    @classmethod
    def from_dict(cls, doc: Optional[dict]) -> "PipelineConfig":
        doc = doc or {}
        if not isinstance(doc, dict):
            raise ConfigError("configuration must be a mapping")
        extra = set(doc) - _TOP_KEYS
        if extra:
            raise ConfigError(f"unknown configuration key(s): {sorted(extra)}")
        defaults = doc.get("defaults") or {}
        extra = set(defaults) - _DEFAULT_KEYS
        if extra:
            raise ConfigError(f"unknown default key(s): {sorted(extra)}")
        kwargs = dict(defaults)
        if "enabled_steps" in doc:
            kwargs["enabled_steps"] = tuple(doc["enabled_steps"] or ())
        for key in ("workers", "strict_labels", "report_format", "log_level"):
            if key in doc:
                kwargs[key] = doc[key]
        kwargs["organ_overrides"] = {k: dict(v or {}) for k, v in (doc.get("organs") or {}).items()}
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path=None, env=None) -> PipelineConfig:
    """Read a YAML config (or defaults when ``path`` is None) and apply env overrides."""
    doc = {}
    if path is not None:
        try:
            doc = yaml.safe_load(Path(path).read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return apply_env(PipelineConfig.from_dict(doc), env)


def apply_env(config: PipelineConfig, env=None) -> PipelineConfig:
    env = os.environ if env is None else env
    changes = {}
    if env.get("MASKREPAIR_WORKERS"):
        try:
            changes["workers"] = int(env["MASKREPAIR_WORKERS"])
        except ValueError as exc:
            raise ConfigError("MASKREPAIR_WORKERS must be an integer") from exc
    if env.get("MASKREPAIR_LOG_LEVEL"):
        changes["log_level"] = env["MASKREPAIR_LOG_LEVEL"].upper()
    return replace(config, **changes) if changes else config
