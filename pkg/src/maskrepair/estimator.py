"""scikit-learn style front end for the correction pipeline."""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .config import STEPS, PipelineConfig
from .errors import DimensionMismatch
from .evaluation import case_dsc
from .organ_rules import compile_plan
from .pipeline import process_case
from .schema import OrganSchema, reference_schema
from .volume import BinaryMask, LabelVolume, SegmentationCase, decompose, recompose


def check_label_volume(X, spacing=(1.0, 1.0, 1.0), orientation=None) -> LabelVolume:
    """Accept a LabelVolume or a 3-D integer array and return a LabelVolume."""
    if isinstance(X, LabelVolume):
        return X
    arr = np.asarray(X)
    if arr.ndim != 3:
        raise DimensionMismatch(f"expected a 3-D label array, got shape {arr.shape}")
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
            raise ValueError("label arrays must hold integers")
        arr = arr.astype(np.int64)
    elif arr.dtype.kind not in "iub":
        raise ValueError(f"unsupported label dtype {arr.dtype}")
    return LabelVolume(arr, spacing, orientation)


def check_binary_mask(X, spacing=(1.0, 1.0, 1.0)) -> BinaryMask:
    if isinstance(X, BinaryMask):
        return X
    arr = np.asarray(X)
    if arr.ndim != 3:
        raise DimensionMismatch(f"expected a 3-D mask, got shape {arr.shape}")
    return BinaryMask(arr.astype(bool), spacing)


class ShapeCorrector(BaseEstimator, TransformerMixin):
    """Anatomy-aware label cleanup as a transformer.

    ``fit`` only validates parameters and compiles the rule plan; nothing is
    learned from data. ``transform`` accepts a label volume (or array) or a
    list of them and returns the corrected counterpart of the same kind.
    """

    def __init__(self, schema: Optional[OrganSchema] = None, enabled_steps=STEPS, connectivity=26,
                 check_size_threshold=500, d_merge=10.0, r_bridge=1, lateral_axis_fallback=0,
                 merged_split_fraction=0.6, strict_labels=False, spacing=(1.0, 1.0, 1.0),
                 orientation=("LR", "AP", "SI")):
        self.schema = schema
        self.enabled_steps = enabled_steps
        self.connectivity = connectivity
        self.check_size_threshold = check_size_threshold
        self.d_merge = d_merge
        self.r_bridge = r_bridge
        self.lateral_axis_fallback = lateral_axis_fallback
        self.merged_split_fraction = merged_split_fraction
        self.strict_labels = strict_labels
        self.spacing = spacing
        self.orientation = orientation

    def _config(self) -> PipelineConfig:
        return PipelineConfig(
            enabled_steps=tuple(self.enabled_steps),
            connectivity=self.connectivity,
            check_size_threshold=self.check_size_threshold,
            d_merge=self.d_merge,
            r_bridge=self.r_bridge,
            lateral_axis_fallback=self.lateral_axis_fallback,
            merged_split_fraction=self.merged_split_fraction,
            strict_labels=self.strict_labels,
        )

    def fit(self, X=None, y=None):
        self.schema_ = self.schema if self.schema is not None else reference_schema()
        self.config_ = self._config()
        self.plan_ = compile_plan(self.schema_, self.config_)
        return self

    def _check_fitted(self):
        if not hasattr(self, "plan_"):
            raise NotFittedError("ShapeCorrector is not fitted yet; call fit first")

    def _as_case(self, X, idx=0) -> SegmentationCase:
        if isinstance(X, SegmentationCase):
            return X
        vol = check_label_volume(X, self.spacing, self.orientation)
        return decompose(vol, self.schema_, strict=self.strict_labels, case_id=f"case_{idx}")

    def _one(self, X, idx=0):
        case = self._as_case(X, idx)
        corrected, _ = process_case(case, self.plan_, self.config_)
        if isinstance(X, SegmentationCase):
            return corrected
        vol = recompose(corrected, self.schema_)
        return vol if isinstance(X, LabelVolume) else vol.data.astype(np.asarray(X).dtype)

    def transform(self, X):
        self._check_fitted()
        if isinstance(X, (list, tuple)):
            return [self._one(x, i) for i, x in enumerate(X)]
        return self._one(X)

    def score(self, X, y):
        """Mean organ-wise DSC of the corrected ``X`` against reference labels ``y``."""
        self._check_fitted()
        xs = X if isinstance(X, (list, tuple)) else [X]
        ys = y if isinstance(y, (list, tuple)) else [y]
        if len(xs) != len(ys):
            raise ValueError("X and y must hold the same number of cases")
        values = []
        for i, (x, t) in enumerate(zip(xs, ys)):
            pred = self._one(self._as_case(x, i), i)
            values.extend(case_dsc(pred, self._as_case(t, i)).values())
        return float(np.mean(values)) if values else 1.0
