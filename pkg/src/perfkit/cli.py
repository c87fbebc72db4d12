"""Command-line pipeline: `maps`, `preprocess`, `eval` and `phantom`.

Exit codes are a stable contract: 0 success, 1 I/O failure, 2 validation
failure. No output artifact contains a timestamp, so repeated runs with
fixed inputs and seed are byte-identical. Set PERFKIT_LOG=DEBUG|INFO|...
for diagnostics on standard error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import evaluation, kinetics, nifti, phantom, preprocess
from .volume import DceSeries, Grid3, Volume3

log = logging.getLogger("perfkit.cli")

# Filename suffixes that carry artifact role, not patient identity.
_ROLE_SUFFIXES = ("_pred", "_prob", "_gt", "_labels", "_preproc", "_dce")


def patient_id_from_path(path: str | Path) -> str:
    """Patient identifier encoded in a filename stem.

    Role suffixes (`_prob`, `_labels`, ...) are stripped repeatedly, so
    `caseA_preproc_prob.nii.gz` and `caseA_labels.nii.gz` both map to `caseA`.
    """
    s = nifti.stem(path)
    stripped = True
    while stripped:
        stripped = False
        for suffix in _ROLE_SUFFIXES:
            if s.endswith(suffix) and len(s) > len(suffix):
                s = s[: -len(suffix)]
                stripped = True
    return s


def _cmd_maps(args: argparse.Namespace) -> int:
    series = nifti.read_nifti(args.dce, timing_path=args.timing)
    if not isinstance(series, DceSeries):
        raise ValueError(f"expected 4D series, got a 3D volume: {args.dce}")
    mask = None
    if args.mask is not None:
        mask_volume = nifti.read_nifti(args.mask)
        if not isinstance(mask_volume, Volume3):
            raise ValueError(f"mask must be a 3D volume: {args.mask}")
        if not mask_volume.grid.compatible(series.frames[0].grid):
            raise ValueError("mask grid does not match the series grid")
        mask = mask_volume.voxels != 0

    maps = kinetics.compute_perfusion_maps(series, mask=mask, n_jobs=args.jobs)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    s = nifti.stem(args.dce)
    named = {
        "tmax": maps.tmax_map,
        "washin": maps.wash_in_map,
        "washout": maps.wash_out_map,
        "pctenh": maps.percent_enhancement_map,
        "maxslope": maps.max_slope_volume,
    }
    for name, volume in named.items():
        nifti.write_nifti(volume, out / f"{s}_{name}.nii.gz")
        log.info("wrote %s", out / f"{s}_{name}.nii.gz")
    meta = {
        "time_unit": maps.time_unit,
        "max_slope_frame_index": maps.max_slope_frame_index,
        "degenerate_voxels": maps.degenerate_voxels,
    }
    with open(out / f"{s}_maps.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def _cmd_preprocess(args: argparse.Namespace) -> int:
    config = (
        preprocess.PreprocessConfig.from_json(args.config)
        if args.config is not None
        else preprocess.PreprocessConfig()
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    processed = []
    for path in args.inputs:
        volume = nifti.read_nifti(path)
        if not isinstance(volume, Volume3):
            raise ValueError(f"expected 3D volume, got a 4D series: {path}")
        result, degenerate = preprocess.preprocess_volume(volume, config)
        if degenerate:
            log.warning("constant volume %s normalized to zeros", path)
        processed.append(result)
        nifti.write_nifti(result, out / f"{nifti.stem(path)}_preproc.nii.gz")
    if args.stack:
        stack = preprocess.assemble_channels(processed, names=tuple(nifti.stem(p) for p in args.inputs))
        nifti.write_stack(stack, out / "stack.nii.gz")
    return 0


def _dice_prostate(pred_path: str, gt_path: str) -> float:
    """Whole-gland Dice: any non-background class counts as prostate."""
    pmap = nifti.read_probability_map(pred_path)
    gt = nifti.read_labels(gt_path)
    if not pmap.grid.compatible(gt.grid):
        raise ValueError(f"prediction and label grids differ for {pred_path}")
    pred_mask = np.argmax(pmap.probs, axis=3) >= 1
    gt_mask = gt.labels >= 1
    return evaluation.dice(pred_mask, gt_mask)


def _cmd_eval(args: argparse.Namespace) -> int:
    if len(args.pred) != len(args.gt):
        raise ValueError(f"{len(args.pred)} predictions vs {len(args.gt)} label volumes")
    pairs = list(zip(args.pred, args.gt))
    for pred_path, gt_path in pairs:
        pid_pred = patient_id_from_path(pred_path)
        pid_gt = patient_id_from_path(gt_path)
        if pid_pred != pid_gt:
            raise ValueError(f"patient id mismatch: {pred_path} ({pid_pred}) vs {gt_path} ({pid_gt})")

    annotations = nifti.read_annotations(args.annotations)
    if args.cs_only:
        annotations = [a for a in annotations if int(a.gs) >= 2]
    if not annotations:
        raise ValueError("no ground-truth lesions to evaluate against")

    candidates = []
    dices = []
    for pred_path, gt_path in pairs:
        pid = patient_id_from_path(pred_path)
        pmap = nifti.read_probability_map(pred_path)
        candidates.extend(
            evaluation.extract_candidates(pmap, cs_only=args.cs_only, threshold=args.theta, patient_id=pid)
        )
        dices.append(_dice_prostate(pred_path, gt_path))

    curve = evaluation.froc(candidates, annotations, n_patients=len(pairs), hit_ratio=args.hit_ratio)
    confusion = evaluation.lesion_grading_confusion(candidates, annotations, hit_ratio=args.hit_ratio)
    summary = {
        "kappa": evaluation.quadratic_weighted_kappa(confusion),
        "sensi_1fp": evaluation.sensitivity_at_fp(curve, 1.0),
        "sensi_2fp": evaluation.sensitivity_at_fp(curve, 2.0),
        "sensi_max": curve.max_sensitivity,
        "max_fp": curve.max_fp,
        "dice_prostate": float(np.mean(dices)),
    }

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "froc.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "fp_per_patient", "sensitivity"])
        for tau, (fp, se) in zip(curve.thresholds, curve.points):
            writer.writerow([repr(float(tau)), repr(fp), repr(se)])
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "confusion.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in confusion.counts:
            writer.writerow([int(x) for x in row])
    log.info("summary: %s", summary)
    return 0


def _cmd_phantom(args: argparse.Namespace) -> int:
    spec = phantom.load_phantom_spec(args.spec)
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    result = phantom.synth_dce(spec)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    # artifacts carry the patient id so they feed straight into `eval`
    s = spec.patient_id
    nifti.write_series(result.series, out / f"{s}_dce.nii.gz")
    nifti.write_nifti(result.labels, out / f"{s}_labels.nii.gz")
    nifti.write_annotations(list(result.annotations), out / f"{s}_annotations.json")
    truth = {name: dataclasses.asdict(t) for name, t in sorted(result.truth.items())}
    with open(out / f"{s}_truth.json", "w") as fh:
        json.dump(truth, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("phantom written to %s (%d regions)", out, len(result.truth))
    return 0


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _open_unit_interval(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return value


def _hit_ratio(text: str) -> float:
    value = float(text)
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1], got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perfkit",
        description="Perfusion-map computation, preprocessing, lesion-level evaluation and phantom synthesis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_maps = sub.add_parser("maps", help="compute the five perfusion maps from a 4D DCE series")
    p_maps.add_argument("dce", help="4D NIfTI input")
    p_maps.add_argument("--timing", help="frame-time sidecar (seconds, one per line)")
    p_maps.add_argument("--mask", help="3D NIfTI; only nonzero voxels are analyzed")
    p_maps.add_argument("--jobs", type=_positive_int, default=os.cpu_count() or 1,
                        help="worker threads (results are identical for any value)")
    p_maps.add_argument("--out", required=True, help="output directory")
    p_maps.set_defaults(func=_cmd_maps)

    p_pre = sub.add_parser("preprocess", help="resample, crop and normalize volumes")
    p_pre.add_argument("inputs", nargs="+", help="3D NIfTI inputs")
    p_pre.add_argument("--config", help="JSON config (target_spacing, crop_size, normalize)")
    p_pre.add_argument("--stack", action="store_true", help="also write one multichannel stack")
    p_pre.add_argument("--out", required=True, help="output directory")
    p_pre.set_defaults(func=_cmd_preprocess)

    p_eval = sub.add_parser("eval", help="lesion-level FROC, kappa and Dice from probability maps")
    p_eval.add_argument("--pred", nargs="+", required=True, help="per-patient 6-channel probability maps")
    p_eval.add_argument("--gt", nargs="+", required=True, help="per-patient ground-truth label volumes")
    p_eval.add_argument("--annotations", required=True, help="ground-truth lesion JSON")
    p_eval.add_argument("--theta", type=_open_unit_interval, default=evaluation.DEFAULT_THRESHOLD,
                        help="lesion-mass foreground threshold")
    p_eval.add_argument("--hit-ratio", type=_hit_ratio, default=evaluation.DEFAULT_HIT_RATIO,
                        help="fraction of a GT lesion a candidate must cover")
    p_eval.add_argument("--cs-only", action="store_true",
                        help="restrict to clinically significant lesions (GS > 6)")
    p_eval.add_argument("--out", required=True, help="output directory")
    p_eval.set_defaults(func=_cmd_eval)

    p_phantom = sub.add_parser("phantom", help="synthesize a DCE exam from a phantom spec")
    p_phantom.add_argument("spec", help="phantom spec JSON")
    p_phantom.add_argument("--seed", type=int, help="override the spec's noise seed")
    p_phantom.add_argument("--out", required=True, help="output directory")
    p_phantom.set_defaults(func=_cmd_phantom)
    return parser


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("PERFKIT_LOG", "WARNING").upper()
    if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
        level = "WARNING"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:  # includes NiftiError
        print(f"perfkit {args.command}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"perfkit {args.command}: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    raise SystemExit(main())
