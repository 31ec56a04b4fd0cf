"""Rule-based anatomical cleanup of multi-organ segmentation label volumes."""

from .config import STEPS, PipelineConfig, load_config
from .errors import MaskRepairError
from .estimator import ShapeCorrector, check_binary_mask, check_label_volume
from .evaluation import CaseReport, case_dsc, dsc, render_report
from .nifti import read_label_volume, write_label_volume
from .organ_rules import RulePlan, apply_organ_rules, compile_plan
from .pipeline import BatchReport, process_case, run_batch
from .schema import OrganSchema, OrganSpec, load_schema, reference_schema
from .volume import BinaryMask, LabelVolume, SegmentationCase, decompose, recompose

__version__ = "0.1.0"

__all__ = [
    "STEPS", "PipelineConfig", "load_config", "MaskRepairError", "ShapeCorrector",
    "check_binary_mask", "check_label_volume", "CaseReport", "case_dsc", "dsc", "render_report",
    "read_label_volume", "write_label_volume", "RulePlan", "apply_organ_rules", "compile_plan",
    "BatchReport", "process_case", "run_batch", "OrganSchema", "OrganSpec", "load_schema",
    "reference_schema", "BinaryMask", "LabelVolume", "SegmentationCase", "decompose", "recompose",
]
