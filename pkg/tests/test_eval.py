import csv
import io
import json

import numpy as np
import pytest

from maskrepair.errors import DimensionMismatch
from maskrepair.evaluation import (
    CaseReport,
    OrganScore,
    case_dsc,
    dsc,
    render_dsc_table,
    render_report,
    score_case,
    summarize,
)
from maskrepair.volume import BinaryMask, LabelVolume, SegmentationCase

from oracles import set_dsc


def test_dsc_half_overlap():
    a = np.zeros((4, 4, 4), bool)
    b = np.zeros((4, 4, 4), bool)
    a[0, :2] = True       # 8 voxels
    b[0, 1:3] = True      # 8 voxels, 4 shared
    assert dsc(a, b) == 0.5


def test_dsc_edge_cases():
    z = np.zeros((3, 3, 3), bool)
    o = np.ones((3, 3, 3), bool)
    assert dsc(z, z) == 1.0
    assert dsc(z, o) == 0.0
    assert dsc(o, o) == 1.0
    with pytest.raises(DimensionMismatch):
        dsc(z, np.zeros((3, 3, 4), bool))


def test_dsc_matches_set_oracle(rng):
    for _ in range(20):
        a = rng.random((6, 6, 6)) < rng.random()
        b = rng.random((6, 6, 6)) < rng.random()
        assert dsc(a, b) == pytest.approx(set_dsc(a, b), abs=1e-12)
        assert dsc(a, b) == dsc(b, a)


def _case(masks, cid="c"):
    shape = next(iter(masks.values())).shape
    labels = np.zeros(shape, np.int32)
    for i, m in enumerate(masks.values(), start=1):
        labels[m] = i
    return SegmentationCase(cid, LabelVolume(labels), {k: BinaryMask(v) for k, v in masks.items()})


def test_case_dsc_skips_organs_empty_in_both():
    a = np.zeros((4, 4, 4), bool)
    a[1, 1, 1] = True
    empty = np.zeros_like(a)
    pred = _case({"liver": a, "spleen": empty})
    truth = _case({"liver": a, "spleen": empty})
    assert case_dsc(pred, truth) == {"liver": 1.0}


def _report(cid, organ, before, after):
    return CaseReport(cid, organs={organ: OrganScore(before, after)})


def _rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_single_row_formatting():
    rows = _rows(render_report([_report("c1", "gall_bladder", 0.717, 0.797)]))
    assert rows[0] == ["case_id", "organ", "dsc_before_pct", "dsc_after_pct", "delta_pct"]
    assert rows[1] == ["mean", "gall_bladder", "71.7", "79.7", "+8.0"]
    assert rows[2] == ["c1", "gall_bladder", "71.7", "79.7", "+8.0"]


def test_zero_delta_is_plus_zero():
    rows = _rows(render_report([_report("c1", "liver", 0.9, 0.9)]))
    assert rows[1][4] == "+0.0"
    rows = _rows(render_report([_report("c1", "liver", 0.9, 0.8999999)]))
    assert rows[1][4] == "+0.0"


def test_mean_over_cases():
    reports = [_report("a", "liver", 0.70, 0.70), _report("b", "liver", 0.80, 0.90)]
    rows = _rows(render_report(reports))
    assert rows[1] == ["mean", "liver", "75.0", "80.0", "+5.0"]
    assert summarize(reports)[0]["n"] == 2


def test_summary_sorted_by_gain():
    r = CaseReport("x", organs={"liver": OrganScore(0.9, 0.91), "spleen": OrganScore(0.5, 0.9),
                                "colon": OrganScore(0.8, 0.8)})
    assert [s["organ"] for s in summarize([r])] == ["spleen", "liver", "colon"]


def test_json_report_and_determinism():
    reports = [_report("a", "liver", 0.717, 0.797)]
    text = render_report(reports, "json")
    doc = json.loads(text)
    assert doc["summary"][0] == {"organ": "liver", "cases": 1, "dsc_before_pct": "71.7",
                                 "dsc_after_pct": "79.7", "delta_pct": "+8.0"}
    assert doc["cases"][0]["case_id"] == "a"
    assert render_report(reports, "json") == text
    assert render_report(reports, "csv") == render_report(reports, "csv")


def test_unscored_cases_render_blank():
    r = CaseReport("noref", organs={"liver": OrganScore()})
    rows = _rows(render_report([r]))
    assert rows[1] == ["noref", "liver", "", "", ""]


def test_render_rejects_bad_input():
    with pytest.raises(ValueError):
        render_report([])
    with pytest.raises(ValueError):
        render_report([_report("a", "liver", 0.5, 0.5)], "xml")


def test_score_case():
    truth = np.zeros((5, 5, 5), bool)
    truth[1:3, 1:3, 1:3] = True
    before = truth.copy()
    before[4, 4, 4] = True
    r = score_case(CaseReport("c"), _case({"liver": before}), _case({"liver": truth}), _case({"liver": truth}))
    assert r.organs["liver"].dsc_after == 1.0
    assert r.organs["liver"].dsc_before == pytest.approx(16 / 17)


def test_dsc_table():
    text = render_dsc_table({"a": {"liver": 1.0, "spleen": 0.5}, "b": {"liver": 0.8}})
    rows = _rows(text)
    assert rows[0] == ["case_id", "organ", "dsc_pct"]
    assert ["mean", "liver", "90.0"] in rows
    assert ["mean", "spleen", "50.0"] in rows
    doc = json.loads(render_dsc_table({"a": {"liver": 1.0}}, "json"))
    assert doc["summary"][0]["dsc_pct"] == "100.0"
