"""Dice scores and before/after reports."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch
from .volume import BinaryMask, SegmentationCase


def dsc(a, b) -> float:
    """Dice-Sorensen coefficient ``2|a & b| / (|a| + |b|)``; 1.0 when both are empty."""
    arr_a = a.data if isinstance(a, BinaryMask) else np.asarray(a, dtype=bool)
    arr_b = b.data if isinstance(b, BinaryMask) else np.asarray(b, dtype=bool)
    if arr_a.shape != arr_b.shape:
        raise DimensionMismatch(f"cannot compare masks of shape {arr_a.shape} and {arr_b.shape}")
    na = int(np.count_nonzero(arr_a))
    nb = int(np.count_nonzero(arr_b))
    if na + nb == 0:
        return 1.0
    inter = int(np.count_nonzero(arr_a & arr_b))
    return 2.0 * inter / (na + nb)


def case_dsc(pred: SegmentationCase, truth: SegmentationCase, organs: Optional[Iterable[str]] = None) -> Dict[str, float]:
    """Organ-wise DSC. Organs empty in both cases are left out."""
    if organs is None:
        organs = [n for n in truth.organs if n in pred.organs or not truth.organs[n].empty]
        organs += [n for n in pred.organs if n not in truth.organs]
    out = {}
    for name in organs:
        p, t = pred.mask(name), truth.mask(name)
        if p.empty and t.empty:
            continue
        out[name] = dsc(p, t)
    return out


@dataclass
class OrganScore:
    dsc_before: Optional[float] = None
    dsc_after: Optional[float] = None

    @property
    def delta(self) -> Optional[float]:
        if self.dsc_before is None or self.dsc_after is None:
            return None
        return self.dsc_after - self.dsc_before


@dataclass
class CaseReport:
    """Per-case scores plus the ordered log of ``(step, scope, StepOutcome)``."""

    case_id: str
    organs: Dict[str, OrganScore] = field(default_factory=dict)
    step_log: list = field(default_factory=list)
    error: Optional[str] = None

    @property
    def changed(self) -> bool:
        return any(o.changed for _, _, o in self.step_log)

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "organs": {
                name: {"dsc_before": s.dsc_before, "dsc_after": s.dsc_after, "delta": s.delta}
                for name, s in self.organs.items()
            },
            "step_log": [
                {"step": step, "organ": scope, **outcome.to_dict()}
                for step, scope, outcome in self.step_log
            ],
            "error": self.error,
        }


def score_case(report: CaseReport, before: SegmentationCase, after: SegmentationCase,
               truth: SegmentationCase) -> CaseReport:
    """Fill ``report.organs`` with DSC of ``before`` and ``after`` against ``truth``."""
    names = list(truth.organs)
    names += [n for n in before.organs if n not in names]
    names += [n for n in after.organs if n not in names]
    for name in names:
        t = truth.mask(name)
        b, a = before.mask(name), after.mask(name)
        if t.empty and b.empty and a.empty:
            continue
        report.organs[name] = OrganScore(dsc(b, t), dsc(a, t))
    return report


def _pct(x: float) -> str:
    return f"{x * 100:.1f}"


def _signed_pct(x: float) -> str:
    text = f"{x * 100:+.1f}"
    return "+0.0" if text == "-0.0" else text


def summarize(reports: Sequence[CaseReport]) -> List[dict]:
    """Per-organ means of before, after and delta, largest gain first."""
    acc: Dict[str, List[OrganScore]] = {}
    for r in reports:
        for name, s in r.organs.items():
            if s.delta is not None:
                acc.setdefault(name, []).append(s)
    rows = []
    for name, scores in acc.items():
        before = float(np.mean([s.dsc_before for s in scores]))
        after = float(np.mean([s.dsc_after for s in scores]))
        rows.append({"organ": name, "n": len(scores), "dsc_before": before,
                     "dsc_after": after, "delta": after - before})
    rows.sort(key=lambda r: (-round(r["delta"], 12), r["organ"]))
    return rows


CSV_COLUMNS = ("case_id", "organ", "dsc_before_pct", "dsc_after_pct", "delta_pct")


def render_report(reports: Sequence[CaseReport], format: str = "csv") -> str:
    """Render before/after DSC as CSV or JSON.

    The CSV lists the per-organ means first (``case_id`` = ``mean``, sorted by
    descending gain), then every per-case row. Percentages carry one decimal
    and deltas an explicit sign.
    """
    if not reports:
        raise ValueError("render_report needs at least one case report")
    summary = summarize(reports)
    if format == "json":
        doc = {
            "summary": [
                {"organ": r["organ"], "cases": r["n"],
                 "dsc_before_pct": _pct(r["dsc_before"]), "dsc_after_pct": _pct(r["dsc_after"]),
                 "delta_pct": _signed_pct(r["delta"])}
                for r in summary
            ],
            "cases": [r.to_dict() for r in reports],
        }
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"
    if format != "csv":
        raise ValueError(f"unknown report format {format!r}")

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    order = [r["organ"] for r in summary]
    for r in summary:
        writer.writerow(["mean", r["organ"], _pct(r["dsc_before"]), _pct(r["dsc_after"]),
                         _signed_pct(r["delta"])])
    for report in reports:
        for name in order + [n for n in report.organs if n not in order]:
            s = report.organs.get(name)
            if s is None:
                continue
            if s.delta is None:
                writer.writerow([report.case_id, name, "", "", ""])
            else:
                writer.writerow([report.case_id, name, _pct(s.dsc_before), _pct(s.dsc_after),
                                 _signed_pct(s.delta)])
    return buf.getvalue()


def render_dsc_table(scores: Dict[str, Dict[str, float]], format: str = "csv") -> str:
    """Single-run DSC table: ``{case_id: {organ: dsc}}`` with per-organ means first."""
    acc: Dict[str, List[float]] = {}
    for per_case in scores.values():
        for organ, value in per_case.items():
            acc.setdefault(organ, []).append(value)
    means = sorted(((float(np.mean(v)), k) for k, v in acc.items()))
    if format == "json":
        doc = {
            "summary": [{"organ": k, "dsc_pct": _pct(m), "cases": len(acc[k])} for m, k in means],
            "cases": {cid: {k: _pct(v) for k, v in per.items()} for cid, per in scores.items()},
        }
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("case_id", "organ", "dsc_pct"))
    for m, k in means:
        writer.writerow(["mean", k, _pct(m)])
    for cid, per in scores.items():
        for organ, value in per.items():
            writer.writerow([cid, organ, _pct(value)])
    return buf.getvalue()
