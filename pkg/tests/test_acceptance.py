"""Acceptance suite: one test per criterion, each reported on its own line."""

import os
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy import ndimage

from maskrepair.config import PipelineConfig
from maskrepair.evaluation import dsc
from maskrepair.morphology import label_components, structure
from maskrepair.nifti import read_label_volume, write_label_volume
from maskrepair.organ_rules import compile_plan
from maskrepair.pipeline import process_case, run_batch
from maskrepair.shape_ops import (
    reassign_false_positives,
    reassign_left_right_based_on_liver,
    split_right_left,
)
from maskrepair.synth import ERROR_CLASSES, random_case
from maskrepair.volume import LabelVolume, recompose

from helpers import hand_header
from oracles import flood_fill_components, set_dsc
from scenes import random_mask, random_masks

SINGLE_CLASSES = ("artifact", "false_positive", "laterality")
ADJACENCY = {"colon": ["intestine", "liver"], "intestine": ["colon"], "liver": ["colon", "intestine"],
             "lung_right": ["lung_left", "liver"], "lung_left": ["lung_right"]}


def _organ_scores(truth, before, after):
    out = {}
    for name, t in truth.organs.items():
        if t.empty and before.mask(name).empty and after.mask(name).empty:
            continue
        out[name] = (dsc(before.mask(name), t), dsc(after.mask(name), t))
    return out


@pytest.mark.criterion(1, "component labeling matches flood fill (100 x 20^3 x {6,18,26}, < 10 s)")
def test_criterion_01_labeling_oracle(record):
    rng = np.random.default_rng(2024)
    masks = [rng.random((20, 20, 20)) < rng.uniform(0.05, 0.6) for _ in range(100)]
    elapsed = 0.0
    for arr in masks:
        for conn in (6, 18, 26):
            start = time.perf_counter()
            cs = label_components(arr, conn)
            elapsed += time.perf_counter() - start
            ours = [frozenset(map(tuple, np.argwhere(cs.label_grid == k))) for k in range(1, cs.count + 1)]
            theirs = flood_fill_components(arr, conn)
            assert sorted(ours, key=min) == sorted(map(frozenset, theirs), key=min)
            # size-descending ids, ties by first row-major voxel
            assert ours == sorted(ours, key=lambda c: (-len(c), min(c)))
    record(f"labeling time {elapsed:.2f} s")
    assert elapsed < 10.0


@pytest.mark.criterion(2, "DSC matches set-cardinality oracle on 200 x 12^3 pairs within 1e-12")
def test_criterion_02_dsc_oracle(record):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(200):
        a = rng.random((12, 12, 12)) < rng.uniform(0, 0.7)
        b = rng.random((12, 12, 12)) < rng.uniform(0, 0.7)
        worst = max(worst, abs(dsc(a, b) - set_dsc(a, b)))
        assert dsc(a, a) == 1.0
    z = np.zeros((12, 12, 12), bool)
    one = z.copy()
    one[0, 0, 0] = True
    assert dsc(z, z) == 1.0
    assert dsc(one, ~one) == 0.0
    record(f"max abs error {worst:.1e}")
    assert worst <= 1e-12


@pytest.mark.criterion(3, "exact recovery of single injected errors (50 phantoms, < 2 min)")
def test_criterion_03_exact_recovery(plan, config, record):
    start = time.perf_counter()
    failures = []
    for seed in range(50):
        cls = SINGLE_CLASSES[seed % 3]
        corrupted, phantom, _ = random_case(seed, classes=(cls,), config=config)
        out, _ = process_case(corrupted, plan)
        scores = _organ_scores(phantom.clean, corrupted, out)
        bad = {k: a for k, (_, a) in scores.items() if a != 1.0}
        if bad:
            failures.append((seed, cls, bad))
    elapsed = time.perf_counter() - start
    record(f"{50 - len(failures)}/50 exact, {elapsed:.1f} s")
    assert not failures
    assert elapsed < 120.0


@pytest.mark.criterion(4, "fragment recovery: one component, DSC up, only bridge voxels differ")
def test_criterion_04_fragment_recovery(plan, schema, config, record):
    ok = 0
    for seed in range(50):
        corrupted, phantom, recipe = random_case(seed, classes=("fragment",), config=config)
        organ = recipe.injections[0].organ
        clean, before = phantom.clean.mask(organ), corrupted.mask(organ)
        out, _ = process_case(corrupted, plan)
        after = out.mask(organ)
        conn = schema.get(organ).connectivity or config.connectivity
        assert ndimage.label(before.data, structure(conn))[1] >= 2
        assert ndimage.label(after.data, structure(conn))[1] == 1, (seed, organ)
        assert dsc(after, clean) > dsc(before, clean), (seed, organ)
        bridge = after.data & ~before.data
        assert not np.any(before.data & ~after.data)
        # every difference from clean is a bridge voxel or an erased voxel left empty
        assert np.all(((after.data ^ clean.data) & ~bridge) <= (clean.data & ~before.data))
        for name in phantom.clean.organs:
            if name != organ:
                assert out.mask(name) == phantom.clean.mask(name), (seed, name)
        ok += 1
    record(f"{ok}/50 fragments rejoined")


@pytest.fixture(scope="module")
def mixed_corpus(plan, config):
    corpus = []
    for seed in range(50):
        corrupted, phantom, _ = random_case(seed, classes=ERROR_CLASSES, config=config)
        out, _ = process_case(corrupted, plan)
        corpus.append((phantom, corrupted, out))
    return corpus


@pytest.mark.criterion(5, "mixed errors: no organ worse on average, injected organs gain >= 5 points")
def test_criterion_05_mixed_improvement(mixed_corpus, record):
    per_organ = {}
    injected = []
    for phantom, corrupted, out in mixed_corpus:
        for name, (b, a) in _organ_scores(phantom.clean, corrupted, out).items():
            per_organ.setdefault(name, []).append((b, a))
            if corrupted.mask(name) != phantom.clean.mask(name):
                injected.append(a - b)
    for name, pairs in per_organ.items():
        before, after = np.mean(pairs, axis=0)
        assert after >= before, name
    gain = 100 * float(np.mean(injected))
    record(f"mean gain on {len(injected)} injected organ masks {gain:.1f} points")
    assert gain >= 5.0


@pytest.mark.criterion(6, "idempotence over the mixed corpus")
def test_criterion_06_idempotence(mixed_corpus, plan, schema, record):
    for phantom, _, out in mixed_corpus:
        again, report = process_case(out, plan)
        assert again is out and not report.changed
        assert recompose(again, schema) == recompose(out, schema)
    record(f"{len(mixed_corpus)} cases unchanged by a second pass")


@pytest.mark.criterion(7, "workers=1 and workers=8 give identical outputs and reports (20 cases)")
def test_criterion_07_parallel_determinism(tmp_path, schema, config, record):
    inputs, refs = [], {}
    for seed in range(20):
        corrupted, phantom, _ = random_case(100 + seed, config=config)
        path = tmp_path / "in" / f"case{seed:02d}.nii.gz"
        path.parent.mkdir(exist_ok=True)
        write_label_volume(recompose(corrupted, schema), path)
        inputs.append(path)
        refs[f"case{seed:02d}"] = phantom.clean
    serial = run_batch(inputs, schema, replace(config, workers=1), tmp_path / "w1", refs, keep_outputs=True)
    pooled = run_batch(inputs, schema, replace(config, workers=8), tmp_path / "w8", refs, keep_outputs=True)
    assert serial.n_failed == pooled.n_failed == 0
    assert serial.outputs == pooled.outputs
    assert serial.to_dict(timing=False) == pooled.to_dict(timing=False)
    assert serial.render("csv") == pooled.render("csv")
    assert serial.render("json") == pooled.render("json")
    for path in inputs:
        assert (tmp_path / "w1" / path.name).read_bytes() == (tmp_path / "w8" / path.name).read_bytes()
    record(f"{len(inputs)} cases identical")


@pytest.mark.criterion(8, "NIfTI write/read identity for all datatypes, raw and gzip, byte-swapped read")
def test_criterion_08_nifti_round_trip(tmp_path, record):
    rng = np.random.default_rng(88)
    n = 0
    for dtype in (np.uint8, np.int16, np.uint16, np.int32):
        top = min(int(np.iinfo(dtype).max), 100000)
        for suffix in (".nii", ".nii.gz"):
            for k in range(5):
                dims = tuple(int(v) for v in rng.integers(1, 12, size=3))
                spacing = tuple(float(v) for v in np.round(rng.uniform(0.3, 5.0, size=3), 3))
                vol = LabelVolume(rng.integers(0, top, size=dims), spacing, ("LR", "AP", "SI"))
                path = tmp_path / f"{np.dtype(dtype).name}_{k}{suffix}"
                write_label_volume(vol, path, datatype=dtype)
                back = read_label_volume(path)
                assert back.dims == vol.dims
                assert np.array_equal(back.data, vol.data)
                assert back.spacing == pytest.approx(vol.spacing, rel=1e-6)
                n += 1
    data = np.arange(60, dtype=np.int16).reshape(3, 4, 5)
    swapped = tmp_path / "swapped.nii"
    swapped.write_bytes(hand_header((3, 4, 5), 4, 16, endian=">", spacing=(0.5, 1.25, 2.5))
                        + data.astype(">i2").tobytes(order="F"))
    back = read_label_volume(swapped)
    assert np.array_equal(back.data, data)
    assert back.spacing == (0.5, 1.25, 2.5)
    record(f"{n} round trips plus big-endian vector")


@pytest.mark.criterion(9, "conservation, partition and permutation over 200 random scenes each")
def test_criterion_09_invariants(record):
    for seed in range(200):
        masks = random_masks(seed)
        out, _ = reassign_false_positives(masks, ADJACENCY, int(seed % 50) * 10, (6, 18, 26)[seed % 3])
        assert sum(m.count for m in out.values()) == sum(m.count for m in masks.values())
        before = np.logical_or.reduce([m.data for m in masks.values()])
        after = np.logical_or.reduce([m.data for m in out.values()])
        assert np.array_equal(before, after)
    for seed in range(200):
        mask = random_mask(seed)
        right, left = split_right_left(mask, seed % 3, (seed % 11) / 10, (6, 18, 26)[seed % 3])
        assert not np.any(right.data & left.data)
        assert np.array_equal(right.data | left.data, mask.data)
    for seed in range(200):
        m = random_masks(seed)
        r, l = m["lung_right"], m["lung_left"]
        r2, l2, _ = reassign_left_right_based_on_liver(r, l, m["liver"], seed % 3)
        assert (r2 is r and l2 is l) or (r2 is l and l2 is r)
    record("600 scenes")


@pytest.fixture(scope="module")
def throughput_corpus(tmp_path_factory, schema):
    root = tmp_path_factory.mktemp("throughput")
    inputs = []
    for seed in range(100):
        corrupted, _, _ = random_case(1000 + seed, dims=(128, 128, 128))
        path = root / f"case{seed:03d}.nii.gz"
        write_label_volume(recompose(corrupted, schema), path)
        inputs.append(path)
    return root, inputs


@pytest.mark.slow
@pytest.mark.criterion(10, "100 cases at 128^3 in < 5 min with >= 3x speedup from 8 workers")
def test_criterion_10_throughput(throughput_corpus, schema, config, record):
    root, inputs = throughput_corpus
    serial = run_batch(inputs, schema, replace(config, workers=1), root / "w1")
    pooled = run_batch(inputs, schema, replace(config, workers=8), root / "w8")
    assert serial.n_failed == pooled.n_failed == 0
    speedup = serial.elapsed / pooled.elapsed
    record(f"workers=1 {serial.elapsed:.1f} s, workers=8 {pooled.elapsed:.1f} s, "
           f"speedup {speedup:.2f}x on {os.cpu_count()} CPU(s)")
    assert pooled.elapsed < 300.0
    assert speedup >= 3.0
