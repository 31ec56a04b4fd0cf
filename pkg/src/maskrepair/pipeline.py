"""Per-case correction and parallel batch runs.

Each case is independent: a batch fans cases out over a process pool and the
collector reassembles results in input order, so the output is the same for
any worker count.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .config import PipelineConfig
from .evaluation import CSV_COLUMNS, CaseReport, render_report, score_case, summarize
from .nifti import case_name, read_label_volume, write_label_volume
from .organ_rules import RulePlan, apply_organ_rules, compile_plan
from .schema import OrganSchema
from .volume import LabelVolume, SegmentationCase, decompose, recompose

log = logging.getLogger(__name__)

CaseSource = Union[str, Path, SegmentationCase]


def process_case(case: SegmentationCase, plan: RulePlan, config: Optional[PipelineConfig] = None,
                 reference: Optional[SegmentationCase] = None) -> Tuple[SegmentationCase, CaseReport]:
    """Run the compiled plan on one case; score against ``reference`` when given."""
    corrected, step_log = apply_organ_rules(case, plan)
    report = CaseReport(case.case_id, step_log=step_log)
    if reference is not None:
        score_case(report, case, corrected, reference)
    return corrected, report


@dataclass
class BatchReport:
    reports: List[CaseReport] = field(default_factory=list)
    failures: List[Tuple[str, str]] = field(default_factory=list)
    outputs: List[Optional[LabelVolume]] = field(default_factory=list)
    elapsed: float = 0.0
    workers: int = 1

    @property
    def n_cases(self) -> int:
        return len(self.reports)

    @property
    def n_failed(self) -> int:
        return len(self.failures)

    @property
    def n_ok(self) -> int:
        return self.n_cases - self.n_failed

    def summary(self) -> List[dict]:
        return summarize([r for r in self.reports if r.error is None])

    def to_dict(self, timing: bool = True) -> dict:
        doc = {
            "cases": [r.to_dict() for r in self.reports],
            "failures": [{"case_id": c, "reason": why} for c, why in self.failures],
            "summary": self.summary(),
        }
        if timing:
            doc["elapsed_s"] = self.elapsed
            doc["workers"] = self.workers
        return doc

    def render(self, format: str = "csv") -> str:
        """Before/after table; cases without references contribute blank DSC fields."""
        if self.reports:
            return render_report(self.reports, format)
        if format == "json":
            return json.dumps({"summary": [], "cases": []}, indent=2) + "\n"
        return ",".join(CSV_COLUMNS) + "\n"


def _load(source: CaseSource, schema: OrganSchema, config: PipelineConfig) -> SegmentationCase:
    if isinstance(source, SegmentationCase):
        return source
    volume = read_label_volume(source)
    return decompose(volume, schema, strict=config.strict_labels,
                     case_id=case_name(source), provenance=str(source))


def _case_id(source: CaseSource) -> str:
    return source.case_id if isinstance(source, SegmentationCase) else case_name(source)


def _run_one(task):
    source, reference, schema, config, plan, output_dir, keep = task
    cid = _case_id(source)
    try:
        case = _load(source, schema, config)
        ref = _load(reference, schema, config) if reference is not None else None
        corrected, report = process_case(case, plan, config, ref)
        volume = recompose(corrected, schema)
        if output_dir is not None:
            suffix = ".nii" if str(source).endswith(".nii") else ".nii.gz"
            write_label_volume(volume, Path(output_dir) / f"{cid}{suffix}")
        return report, None, volume if keep else None
    except Exception as exc:  # isolate every failure to its own case
        reason = f"{type(exc).__name__}: {exc}"
        return CaseReport(cid, error=reason), reason, None


def run_batch(inputs: Sequence[CaseSource], schema: OrganSchema, config: PipelineConfig,
              output_dir=None, references: Optional[Dict[str, CaseSource]] = None,
              keep_outputs: Optional[bool] = None) -> BatchReport:
    """Correct every input; failures are recorded per case and never abort the batch.

    ``inputs`` are NIfTI paths or in-memory cases. ``references`` maps case ids
    to ground-truth sources. Corrected volumes are written to ``output_dir``
    and, unless ``keep_outputs`` is False, returned in ``outputs``.
    """
    start = time.perf_counter()
    plan = compile_plan(schema, config)
    if keep_outputs is None:
        keep_outputs = output_dir is None
    if output_dir is not None:
        Path(output_dir).mkdir(parents=True, exist_ok=True)
    references = references or {}
    tasks = [(src, references.get(_case_id(src)), schema, config, plan, output_dir, keep_outputs)
             for src in inputs]

    if config.workers == 1 or len(tasks) <= 1:
        results = [_run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_one, tasks, chunksize=1))

    batch = BatchReport(workers=config.workers)
    for report, failure, volume in results:
        batch.reports.append(report)
        batch.outputs.append(volume)
        if failure is not None:
            log.error("case %s failed: %s", report.case_id, failure)
            batch.failures.append((report.case_id, failure))
    batch.elapsed = time.perf_counter() - start
    return batch
