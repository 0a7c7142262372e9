"""
cabb: command line for the crop-aware bounding box toolkit.

    solve      solve one instance and print Δ*, loss, cases and gradient
    fuzz       certify the solver against the brute-force oracle
    gradcheck  compare the envelope gradient with central differences
    bench      solver throughput
    sample     simulate CUS / ISUS sampling and write CSV statistics

Exit codes: 0 ok, 1 property violation, 2 usage or data error.

CSV outputs of `sample` (header row, comma separated):
    decisions.csv  index,class_id,image_id,instance_id,is_thing,target_level,resize,sigma,clamped,crop_x0,crop_y0,crop_w,crop_h
    levels.csv     level,count
    crop_iou.csv   size_lo,size_hi,count,mean_iou
    scales.csv     bin_lo,bin_hi,count
"""

import argparse
import json
import logging
import os
import sys
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

import pandas as pd

from cropaware.annotations import SynthSpec, load_annotations, synth_dataset
from cropaware.common import CabbError, default_beta, default_output_dir, default_workers, parse_floats
from cropaware.geometry import BOX_FORMATS, CropRect, format_delta, parse_box, parse_delta
from cropaware.oracle import OracleConfig
from cropaware.pipeline import (
    BENCH_FLOOR,
    BENCH_TARGET,
    InstanceRecord,
    run_bench,
    run_fuzz,
    run_gradcheck,
    stratified_records,
)
from cropaware.sampling import DATASET_PRESETS, PyramidSpec, SampleMode, level_histogram, preset, simulate
from cropaware.solver import SolverConfig
from cropaware.stats import DEFAULT_SCALE_EDGES, crop_iou_by_size, iou_trend_violations, scale_histogram

logger = logging.getLogger("cabb")

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2

FLOAT_FORMAT = "%.10g"
MAX_DUMPED = 20


def positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {v}")
    return v


def beta_list(text: str) -> List[float]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            v = float(Fraction(part))
        except (ValueError, ZeroDivisionError):
            raise argparse.ArgumentTypeError(f"bad beta {part!r}")
        if v <= 0:
            raise argparse.ArgumentTypeError(f"beta must be positive, got {part!r}")
        out.append(v)
    if not out:
        raise argparse.ArgumentTypeError("need at least one beta")
    return out


def float_pair(text: str):
    try:
        a, b = parse_floats(text, 2)
    except CabbError as e:
        raise argparse.ArgumentTypeError(str(e))
    return (a, b)


# =========================
# solve
# =========================


def _record_from_args(args: argparse.Namespace) -> InstanceRecord:
    if args.instance:
        return InstanceRecord.parse(args.instance, args.box_format)
    missing = [name for name in ("gt", "anchor", "crop", "pred") if getattr(args, name) is None]
    if missing:
        raise argparse.ArgumentTypeError(f"missing --{', --'.join(missing)} (or pass --instance)")
    x0, y0 = args.origin or (0.0, 0.0)
    return InstanceRecord(
        gt=parse_box(args.gt, args.box_format),
        anchor=parse_box(args.anchor, args.box_format),
        crop=CropRect(args.crop[0], args.crop[1], x0, y0),
        pred=parse_delta(args.pred),
        beta=args.beta if args.beta is not None else default_beta(),
        image=args.image,
    )


def cmd_solve(args: argparse.Namespace) -> int:
    try:
        record = _record_from_args(args)
    except argparse.ArgumentTypeError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    sol = record.solve(SolverConfig(beta=record.beta, eps=args.eps))
    standard = record.l_bb_cropped()

    print(f"case={sol.per_dim_case[0].value},{sol.per_dim_case[1].value}")
    print(f"branch={sol.per_dim_branch[0]},{sol.per_dim_branch[1]}")
    print(f"delta_star={format_delta(sol.delta_star)}")
    print(f"loss={sol.loss!r}")
    print(f"l_bb_cropped={standard!r}")
    print(f"grad_delta={sol.grad_delta[0]!r},{sol.grad_delta[1]!r}")
    print(f"grad_omega={sol.grad_omega[0]!r},{sol.grad_omega[1]!r}")
    if args.json:
        print(
            json.dumps(
                {
                    "instance": record.to_line(),
                    "case": [k.value for k in sol.per_dim_case],
                    "branch": list(sol.per_dim_branch),
                    "delta_star": list(sol.delta_star.as_tuple()),
                    "loss": sol.loss,
                    "l_bb_cropped": standard,
                    "grad_delta": list(sol.grad_delta),
                    "grad_omega": list(sol.grad_omega),
                },
                sort_keys=True,
            )
        )
    return EXIT_OK


# =========================
# fuzz
# =========================


def cmd_fuzz(args: argparse.Namespace) -> int:
    records = stratified_records(args.n, args.seed, args.beta)
    oracle_cfg = OracleConfig(grid_points=args.grid_points, refine_passes=args.refine_passes)
    outcomes = run_fuzz(records, oracle_cfg, args.workers)

    failed = [(o, o.violations(args.tol)) for o in outcomes]
    failed = [(o, v) for o, v in failed if v]
    kinds: Dict[str, int] = {}
    for o in outcomes:
        for k in o.kinds:
            kinds[k] = kinds.get(k, 0) + 1

    worst = max(outcomes, key=lambda o: o.gap)
    print(f"instances={len(outcomes)}")
    print(f"dimension_kinds={json.dumps(kinds, sort_keys=True)}")
    print(f"worst_gap={worst.gap!r}")
    print(f"worst_gap_instance={worst.line}")
    print(f"worst_feasibility={max(o.feasibility for o in outcomes)!r}")
    print(f"worst_lower_bound_gap={max(o.lower_bound_gap for o in outcomes)!r}")
    print(f"violations={len(failed)}")

    if args.report:
        frame = pd.DataFrame(
            [
                {
                    "kind_x": o.kinds[0],
                    "kind_y": o.kinds[1],
                    "beta": o.beta,
                    "gap": o.gap,
                    "feasibility": o.feasibility,
                    "lower_bound_gap": o.lower_bound_gap,
                    "instance": o.line,
                }
                for o in outcomes
            ]
        )
        frame.to_csv(args.report, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")

    for o, reasons in failed[:MAX_DUMPED]:
        print(f"FAIL {'; '.join(reasons)}: {o.line}")
    return EXIT_VIOLATION if failed else EXIT_OK


# =========================
# gradcheck
# =========================


def cmd_gradcheck(args: argparse.Namespace) -> int:
    records = stratified_records(args.n, args.seed, args.beta)
    outcomes = run_gradcheck(records, args.h, args.workers)

    raw_ok = sum(1 for o in outcomes if o.raw_max_rel_error <= args.tol)
    bad = [o for o in outcomes if o.max_rel_error > args.tol]
    raw_share = raw_ok / len(outcomes)
    print(f"instances={len(outcomes)}")
    print(f"skipped_probes={sum(o.skipped for o in outcomes)}")
    print(f"max_rel_error={max(o.max_rel_error for o in outcomes)!r}")
    print(f"raw_pass_share={raw_share:.4f}")
    print(f"failures={len(bad)}")
    for o in bad[:MAX_DUMPED]:
        print(f"FAIL rel_error={o.max_rel_error:.3e}: {o.line}")
    if bad or raw_share < args.min_raw_share:
        return EXIT_VIOLATION
    return EXIT_OK


# =========================
# bench
# =========================


def cmd_bench(args: argparse.Namespace) -> int:
    records = stratified_records(args.n, args.seed, [args.beta if args.beta is not None else default_beta()])
    report = run_bench(records, args.batch, args.workers)
    print(f"solves={report.n}")
    print(f"workers={report.workers}")
    print(f"seconds={report.seconds:.4f}")
    print(f"solves_per_sec={report.solves_per_sec:.0f}")
    print(f"per_box_us={report.per_box_us:.3f}")
    print(f"batch={report.batch}")
    print(f"batch_ms_mean={report.batch_ms_mean:.3f}")
    print(f"batch_ms_p50={report.batch_ms_p50:.3f}")
    print(f"batch_ms_p95={report.batch_ms_p95:.3f}")
    passed = report.passes(args.floor)
    print(f"floor={args.floor:g} passed={passed}")
    print(f"target={BENCH_TARGET} met={report.met_target}")
    if not passed:
        return EXIT_VIOLATION
    return EXIT_OK


# =========================
# sample
# =========================


def _decisions_frame(decisions) -> pd.DataFrame:
    frame = pd.DataFrame(
        [
            {
                "index": d.index,
                "class_id": d.class_id,
                "image_id": d.image_id,
                "instance_id": d.instance_id,
                "is_thing": int(d.is_thing),
                "target_level": d.target_level,
                "resize": d.resize,
                "sigma": d.sigma,
                "clamped": int(d.clamped),
                "crop_x0": d.crop_rect.x0,
                "crop_y0": d.crop_rect.y0,
                "crop_w": d.crop_rect.width,
                "crop_h": d.crop_rect.height,
            }
            for d in decisions
        ]
    )
    frame["instance_id"] = frame["instance_id"].astype("Int64")
    frame["target_level"] = frame["target_level"].astype("Int64")
    return frame


def _write_csv(frame: pd.DataFrame, out_dir: str, name: str) -> str:
    path = os.path.join(out_dir, name)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def cmd_sample(args: argparse.Namespace) -> int:
    if args.annotations:
        aset = load_annotations(args.annotations)
    else:
        aset = synth_dataset(
            SynthSpec(
                n_images=args.synth_images,
                n_classes_thing=args.synth_things,
                n_classes_stuff=args.synth_stuff,
                n_instances=args.synth_instances,
                seed=args.synth_seed,
            )
        )

    cfg, mode = preset(args.preset)
    cfg = cfg.with_overrides(
        s0=args.s0,
        r_th=args.r_th,
        r_st=args.r_st,
        crop=tuple(int(v) for v in args.crop) if args.crop else None,
        seed=args.seed,
        level_weights=tuple(parse_floats(args.level_weights, what="level weights")) if args.level_weights else None,
    )
    if args.mode:
        mode = SampleMode(args.mode)
    spec = PyramidSpec(args.level_min, args.level_max, args.canonical_level, args.canonical_scale)

    decisions = simulate(aset, cfg, spec, mode, args.n, args.workers)
    levels = level_histogram(aset, cfg, spec, mode, args.n, measure=args.level_measure, decisions=decisions)
    iou_rows = crop_iou_by_size(aset, cfg, spec, mode, args.n, args.size_edges, decisions=decisions)
    hist = scale_histogram(aset, args.scale_edges)

    os.makedirs(args.out, exist_ok=True)
    written = [
        _write_csv(_decisions_frame(decisions), args.out, "decisions.csv"),
        _write_csv(pd.DataFrame({"level": list(levels), "count": list(levels.values())}), args.out, "levels.csv"),
        _write_csv(
            pd.DataFrame(
                [{"size_lo": r.size_lo, "size_hi": r.size_hi, "count": r.count, "mean_iou": r.mean_iou} for r in iou_rows],
                columns=["size_lo", "size_hi", "count", "mean_iou"],
            ),
            args.out,
            "crop_iou.csv",
        ),
        _write_csv(
            pd.DataFrame({"bin_lo": hist.bin_edges[:-1], "bin_hi": hist.bin_edges[1:], "count": hist.counts}),
            args.out,
            "scales.csv",
        ),
    ]

    thing_draws = sum(1 for d in decisions if d.is_thing)
    print(f"mode={SampleMode(mode).value} draws={len(decisions)} thing_draws={thing_draws}")
    print(f"clamped={sum(1 for d in decisions if d.clamped)}")
    print(f"levels={json.dumps(levels, sort_keys=True)}")
    trend = iou_trend_violations(iou_rows)
    if trend:
        print(f"note: mean crop IoU rises with size in buckets {trend}")
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


# =========================
# CLI
# =========================


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cabb",
        description="Crop-aware bounding box loss: solver, certification, benchmark and sampling simulator.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one instance")
    p.add_argument("--instance", help='"gt=cx,cy,w,h anchor=cx,cy,w,h crop=W,H pred=dx,dy,wx,wy beta=B"')
    p.add_argument("--gt")
    p.add_argument("--anchor")
    p.add_argument("--crop", type=float_pair, help="W,H")
    p.add_argument("--origin", type=float_pair, help="crop top-left x0,y0 (default 0,0)")
    p.add_argument("--image", type=float_pair, help="image W,H: the image spans [0, W] x [0, H] and the crop sits at --origin inside it; box sides that end inside the image stay pinned")
    p.add_argument("--pred", help="dx,dy,wx,wy")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--box-format", choices=BOX_FORMATS, default="center")
    p.add_argument("--eps", type=float, default=1e-7)
    p.add_argument("--json", action="store_true", help="also print a JSON record")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("fuzz", help="solver vs brute-force oracle on stratified random instances")
    p.add_argument("--n", type=positive_int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--beta", type=beta_list, default=[1.0 / 9.0, 1.0], help="comma list, fractions allowed (default 1/9,1)")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--grid-points", type=int, default=10_000)
    p.add_argument("--refine-passes", type=int, default=3)
    p.add_argument("--workers", type=positive_int, default=default_workers())
    p.add_argument("--report", help="optional CSV with one row per instance")
    p.set_defaults(func=cmd_fuzz)

    p = sub.add_parser("gradcheck", help="envelope gradient vs central differences")
    p.add_argument("--n", type=positive_int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--beta", type=beta_list, default=[1.0 / 9.0, 1.0])
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--min-raw-share", type=float, default=0.95, help="required share of instances passing without exclusions")
    p.add_argument("--workers", type=positive_int, default=default_workers())
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("bench", help="solver throughput")
    p.add_argument("--n", type=positive_int, default=100_000)
    p.add_argument("--batch", type=positive_int, default=512)
    p.add_argument("--workers", "--threads", dest="workers", type=positive_int, default=default_workers())
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument(
        "--floor", type=float, default=float(BENCH_FLOOR), help=f"exit 1 below this many solves/sec (default {BENCH_FLOOR}, 0 disables)"
    )
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sample", help="simulate CUS / ISUS and write CSV statistics")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--annotations", help="JSON annotation file")
    src.add_argument("--synth", action="store_true", help="use a synthetic dataset (default)")
    p.add_argument("--synth-images", type=positive_int, default=200)
    p.add_argument("--synth-instances", type=positive_int, default=2000, help="thing instances; stuff segments are added on top")
    p.add_argument("--synth-things", type=positive_int, default=8)
    p.add_argument("--synth-stuff", type=int, default=4)
    p.add_argument("--synth-seed", type=int, default=0)
    p.add_argument("--preset", choices=sorted(DATASET_PRESETS), default="mvd")
    p.add_argument("--mode", choices=[m.value for m in SampleMode], help="overrides the preset's mode")
    p.add_argument("--n", type=positive_int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--s0", type=float)
    p.add_argument("--r-th", type=float_pair)
    p.add_argument("--r-st", type=float_pair)
    p.add_argument("--crop", type=float_pair, help="W,H")
    p.add_argument("--level-weights", help="comma list, one weight per pyramid level")
    p.add_argument("--level-min", type=int, default=2)
    p.add_argument("--level-max", type=int, default=6)
    p.add_argument("--canonical-level", type=int, default=4)
    p.add_argument("--canonical-scale", type=float, default=224.0)
    p.add_argument(
        "--level-measure",
        choices=("scaled", "cropped"),
        default="scaled",
        help="level of the selected box after scaling (default, matches the ISUS target level) or of its part inside the crop",
    )
    p.add_argument("--scale-edges", type=lambda s: parse_floats(s, what="scale edges"), default=list(DEFAULT_SCALE_EDGES))
    p.add_argument("--size-edges", type=lambda s: parse_floats(s, what="size edges"), default=list(DEFAULT_SCALE_EDGES))
    p.add_argument("--workers", type=positive_int, default=default_workers())
    p.add_argument("--out", default=default_output_dir())
    p.set_defaults(func=cmd_sample)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_arg_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CabbError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
