"""Command-line entry point: process, batch, eval, synth and inspect.

Exit codes: 0 success, 1 case or I/O failures, 2 usage errors. Logs go to
stderr; data only to the files named on the command line.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from .config import load_config
from .errors import MaskRepairError, OutOfBounds
from .evaluation import case_dsc, render_dsc_table, render_report
from .nifti import atomic_write, case_name, is_nifti, read_label_volume, write_label_volume
from .organ_rules import compile_plan
from .pipeline import process_case, run_batch
from .schema import load_schema
from .synth import ERROR_CLASSES, InjectionRecipe, generate_phantom, inject, sample_injection
from .volume import decompose, recompose

log = logging.getLogger("maskrepair")

CONFIG_ENV = "MASKREPAIR_CONFIG"

# label -> RGB; label 0 is black, others cycle through this table
PALETTE = np.array([
    (0, 0, 0), (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200),
    (245, 130, 48), (145, 30, 180), (70, 240, 240), (240, 50, 230), (210, 245, 60),
    (250, 190, 212), (0, 128, 128), (220, 190, 255), (170, 110, 40), (255, 250, 200),
    (128, 0, 0), (170, 255, 195), (128, 128, 0), (255, 215, 180), (0, 0, 128),
], dtype=np.uint8)


def _nifti_files(directory):
    return sorted(p for p in Path(directory).iterdir() if p.is_file() and is_nifti(p))


def _resolve_config(parser, args, required=True):
    path = args.config or os.environ.get(CONFIG_ENV)
    if path is None and required:
        parser.error(f"--config is required (or set {CONFIG_ENV})")
    config = load_config(path)
    if getattr(args, "workers", None) is not None:
        config = replace(config, workers=args.workers)
    logging.getLogger().setLevel(config.log_level)
    return config


def _report_format(path, default):
    suffix = Path(path).suffix.lower()
    return {".json": "json", ".csv": "csv"}.get(suffix, default)


def cmd_process(args, parser) -> int:
    config = _resolve_config(parser, args)
    schema = load_schema(args.schema)
    plan = compile_plan(schema, config)
    volume = read_label_volume(args.input)
    case = decompose(volume, schema, strict=config.strict_labels,
                     case_id=case_name(args.input), provenance=str(args.input))
    reference = None
    if args.reference:
        ref_vol = read_label_volume(args.reference)
        reference = decompose(ref_vol, schema, case_id=case.case_id)
    corrected, report = process_case(case, plan, config, reference)
    same_kind = str(args.input).endswith(".gz") == str(args.output).endswith(".gz")
    if corrected is case and same_kind:
        # untouched input: copy the bytes so the output is bit-identical
        atomic_write(args.output, Path(args.input).read_bytes())
    else:
        write_label_volume(recompose(corrected, schema), args.output)
    lines = [f"case {report.case_id}: {'changed' if report.changed else 'unchanged'}"]
    for step, scope, outcome in report.step_log:
        state = "skipped" if outcome.skipped else ("changed" if outcome.changed else "unchanged")
        note = "; ".join(outcome.notes)
        lines.append(f"  {step:<36} {scope:<16} {state:<9} "
                     f"-{outcome.voxels_removed} +{outcome.voxels_added} ~{outcome.voxels_relabeled}"
                     + (f"  {note}" if note else ""))
    if args.report:
        fmt = _report_format(args.report, config.report_format)
        atomic_write(args.report, render_report([report], fmt).encode())
    print("\n".join(lines))
    return 0


def cmd_batch(args, parser) -> int:
    if args.workers is not None and args.workers < 1:
        parser.error("--workers must be >= 1")
    config = _resolve_config(parser, args)
    schema = load_schema(args.schema)
    if not Path(args.input_dir).is_dir():
        raise MaskRepairError(f"input directory {args.input_dir} does not exist")
    inputs = _nifti_files(args.input_dir)
    references = None
    if args.gt_dir:
        references = {case_name(p): p for p in _nifti_files(args.gt_dir)}
    batch = run_batch(inputs, schema, config, output_dir=args.output_dir, references=references)
    fmt = _report_format(args.report, config.report_format) if args.report else config.report_format
    text = batch.render(fmt)
    if args.report:
        atomic_write(args.report, text.encode())
    for cid, why in batch.failures:
        print(f"failed: {cid}: {why}", file=sys.stderr)
    log.info("%d case(s), %d failed, %.1f s with %d worker(s)",
             batch.n_cases, batch.n_failed, batch.elapsed, batch.workers)
    return 1 if batch.failures else 0


def cmd_eval(args, parser) -> int:
    schema = load_schema(args.schema)
    preds = {case_name(p): p for p in _nifti_files(args.pred_dir)}
    truths = {case_name(p): p for p in _nifti_files(args.gt_dir)}
    if not truths:
        print(f"no NIfTI files in {args.gt_dir}", file=sys.stderr)
        return 1
    unmatched = sorted(set(preds) ^ set(truths))
    scores = {}
    for cid in sorted(set(preds) & set(truths)):
        pred = decompose(read_label_volume(preds[cid]), schema, case_id=cid)
        truth = decompose(read_label_volume(truths[cid]), schema, case_id=cid)
        scores[cid] = case_dsc(pred, truth)
    atomic_write(args.out, render_dsc_table(scores, _report_format(args.out, "csv")).encode())
    for cid in unmatched:
        side = "prediction" if cid in preds else "ground truth"
        print(f"unmatched {side}: {cid}", file=sys.stderr)
    return 1 if unmatched else 0


def cmd_synth(args, parser) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if len(args.dims) not in (1, 3):
        parser.error("--dims takes one or three integers")
    dims = tuple(args.dims) if len(args.dims) == 3 else (args.dims[0],) * 3
    config = load_config(args.config or os.environ.get(CONFIG_ENV))
    fixed = InjectionRecipe.from_yaml(Path(args.recipe).read_text()) if args.recipe else None
    for k in range(args.count):
        seed = args.seed + k
        phantom = generate_phantom(seed, dims, tuple(args.spacing))
        if fixed is not None:
            recipe = fixed
            corrupted, _ = inject(phantom, recipe, config)
        else:
            corrupted, recipe = sample_injection(phantom, seed, args.classes, config)
        stem = f"phantom_{seed:04d}"
        write_label_volume(recompose(phantom.clean, phantom.schema), out / f"{stem}_clean.nii.gz")
        write_label_volume(recompose(corrupted, phantom.schema), out / f"{stem}_corrupted.nii.gz")
        atomic_write(out / f"{stem}_recipe.yaml", recipe.to_yaml().encode())
        log.info("wrote %s", stem)
    return 0


def render_slice(data: np.ndarray, index: int, axis: int) -> bytes:
    """Binary PPM (P6) of one slice with the fixed label palette."""
    if not 0 <= axis < data.ndim:
        raise OutOfBounds(f"axis {axis} outside 0..{data.ndim - 1}")
    if not 0 <= index < data.shape[axis]:
        raise OutOfBounds(f"slice {index} outside 0..{data.shape[axis] - 1} on axis {axis}")
    plane = np.take(data, index, axis=axis)
    colours = np.where(plane[..., None] == 0, PALETTE[0],
                       PALETTE[1 + (plane - 1) % (len(PALETTE) - 1)])
    h, w = plane.shape
    return f"P6\n{w} {h}\n255\n".encode() + colours.astype(np.uint8).tobytes()


def cmd_inspect(args, parser) -> int:
    volume = read_label_volume(args.input)
    atomic_write(args.out, render_slice(volume.data, args.slice, args.axis))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maskrepair",
                                     description="Anatomy-aware cleanup of multi-organ label volumes.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("process", help="correct one label volume")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--config", help=f"YAML config (default from ${CONFIG_ENV})")
    p.add_argument("--schema", help="organ schema YAML (default: bundled reference schema)")
    p.add_argument("--reference", help="ground-truth volume for before/after DSC")
    p.add_argument("--report", help="write the case report (csv or json by suffix)")
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("batch", help="correct every volume in a directory")
    p.add_argument("--input-dir", required=True)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--config")
    p.add_argument("--schema")
    p.add_argument("--workers", type=int)
    p.add_argument("--report")
    p.add_argument("--gt-dir", help="ground-truth volumes matched by file name")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("eval", help="organ-wise DSC of predictions against ground truth")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--schema")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="write phantoms, corrupted copies and recipes")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--dims", type=int, nargs="+", default=[64])
    p.add_argument("--spacing", type=float, nargs=3, default=[1.0, 1.0, 1.0])
    p.add_argument("--recipe", help="injection recipe YAML (default: one error per class)")
    p.add_argument("--classes", nargs="+", default=list(ERROR_CLASSES), choices=ERROR_CLASSES)
    p.add_argument("--config")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("inspect", help="render one slice as a PPM image")
    p.add_argument("--input", required=True)
    p.add_argument("--slice", type=int, required=True)
    p.add_argument("--axis", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, parser)
    except (MaskRepairError, OSError, yaml.YAMLError) as exc:
        print(f"maskrepair {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
