"""
Command line utama composition engine
Subcommand: extract, compose, render, run, eval, bench, oracle
"""

import argparse
import logging
import os
import sys
import time
from pathlib import Path
from typing import List, Optional

# Tambahkan src ke path
sys.path.append(str(Path(__file__).parent))

from dotenv import load_dotenv

from config import EngineConfig, default_config_text, load_config
from detectors import OracleDetector, close_external_detectors, get_external_detector
from errors import CompositionEngineError, DetectorProtocolError, InputError
from extraction import extract_patches, frame_difference
from optimizer import compose_detailed
from oracle import brute_force_min_subframes
from pipeline import (
    METHODS,
    FramePipeline,
    evaluate,
    frame_inputs,
    process_frames,
    render_subframes,
    timing_table,
)
from scaling import band_summary
from utils import (
    dumps_json,
    format_ms,
    list_frames,
    parse_frame_size,
    plan_to_dict,
    read_annotations,
    read_image,
    read_mask,
    read_patches,
    read_plan,
    read_predictions,
    write_image,
    write_json,
    write_patches,
    write_plan,
    write_predictions,
)
from visualization import write_layout_svg

logger = logging.getLogger("cli")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poic",
        description="Patch-of-interest composition for small-object detection on large frames.",
    )
    parser.add_argument("--print-default-config", action="store_true", help="Print the documented default config and exit")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("extract", help="Foreground mask -> patches CSV")
    p.add_argument("--frame", required=True, help="Frame PGM/PPM")
    p.add_argument("--mask", default=None, help="Foreground mask PGM (nonzero = foreground)")
    p.add_argument("--prev", default=None, help="Previous frame for frame differencing")
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--out", required=True, help="Output patches CSV")

    p = sub.add_parser("compose", help="Patches CSV -> plan JSON")
    p.add_argument("--patches", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None, help="Random seed (overrides rng_seed)")
    p.add_argument("--frame-size", default=None, help="WxH (default from config)")
    p.add_argument("--out", required=True, help="Output plan JSON")
    p.add_argument("--svg", default=None, help="Optional layout SVG")

    p = sub.add_parser("render", help="Render sub-frame images of a plan")
    p.add_argument("--frame", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--outdir", required=True)

    for name, help_text in (("run", "End-to-end detection over a frame directory"), ("bench", "Per-stage timing")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--frames", required=True, help="Directory of PGM/PPM frames")
        p.add_argument("--config", default=None)
        p.add_argument("--masks", default=None, help="Directory of masks named like the frames")
        p.add_argument("--detector", default="oracle", help='"oracle" or a detector command line')
        p.add_argument("--annotations", default=None, help="Ground truth CSV")
        p.add_argument("--method", default="ours", choices=METHODS)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="Worker threads (default: logical cores)")
        p.add_argument("--report", default=None, help="Output report JSON")
        if name == "run":
            p.add_argument("--pred", default=None, help="Optional predictions CSV")
        else:
            p.add_argument("--repeat", type=int, default=1)

    p = sub.add_parser("eval", help="Evaluate predictions against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--report", default=None)

    p = sub.add_parser("oracle", help="Brute-force minimum sub-frame count")
    p.add_argument("--patches", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--frame-size", default=None)
    p.add_argument("--out", default=None, help="Optional witness plan JSON")
    return parser


def _setup_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)


def _frame_size(args, cfg: EngineConfig):
    return parse_frame_size(args.frame_size) if args.frame_size else cfg.frame_size


def cmd_extract(args, cfg: EngineConfig) -> int:
    frame = read_image(args.frame)
    height, width = frame.shape[:2]
    if args.mask:
        mask = read_mask(args.mask)
    elif args.prev:
        mask = frame_difference(frame, read_image(args.prev), cfg.extraction.diff_threshold)
    else:
        raise InputError("extract needs --mask or --prev")

    profile = cfg.profile(height)
    logger.debug(f"Scaling bands: {band_summary(profile)}")
    patches = extract_patches(mask, profile, cfg.extraction, (width, height))
    write_patches(args.out, patches)
    logger.info(f"{len(patches)} patches written to {args.out}")
    return 0


def cmd_compose(args, cfg: EngineConfig) -> int:
    cfg = cfg.with_seed(args.seed)
    frame_size = _frame_size(args, cfg)
    patches = read_patches(args.patches)
    outcome = compose_detailed(
        patches, cfg.profile(frame_size[1]), cfg.objective, cfg.ga, cfg.pipeline.canvas_size, frame_size
    )
    report = outcome.report
    logger.info(
        f"Composed {len(patches)} patches into {outcome.plan.n_sub_frames} sub-frames "
        f"({report.generations} generations, {report.retries} retries, fallback={report.used_fallback}, "
        f"pruned={report.pruned})"
    )
    write_plan(args.out, outcome.plan)
    if args.svg:
        write_layout_svg(args.svg, outcome.plan, patches)
    return 0


def cmd_render(args, cfg: EngineConfig) -> int:
    frame = read_image(args.frame)
    plan = read_plan(args.plan)
    images = render_subframes(frame, plan, cfg.pipeline.interpolation, output_size=cfg.pipeline.detector_size)
    outdir = Path(args.outdir)
    suffix = ".pgm" if frame.ndim == 2 else ".ppm"
    for j, image in enumerate(images):
        write_image(outdir / f"subframe_{j:03d}{suffix}", image)
    logger.info(f"{len(images)} sub-frame images written to {outdir}")
    return 0


def _make_detector(args, cfg: EngineConfig, annotations):
    if args.detector == "oracle":
        return OracleDetector(annotations or {})
    return get_external_detector(args.detector, cfg.pipeline.detector_timeout, cfg.pipeline.detector_pool)


def _prepare_frames(args, cfg: EngineConfig):
    cfg = cfg.with_seed(args.seed)
    paths = list_frames(args.frames)
    if not paths:
        raise InputError(f"no PGM/PPM frames in {args.frames}")
    items = frame_inputs(paths, Path(args.masks) if args.masks else None)
    annotations = read_annotations(args.annotations) if args.annotations else None
    height = read_image(paths[0]).shape[0]
    detector = _make_detector(args, cfg, annotations)
    pipeline = FramePipeline(cfg.profile(height), cfg.objective, cfg.ga, cfg.extraction, cfg.pipeline, detector)
    return cfg, items, annotations, pipeline


def cmd_run(args, cfg: EngineConfig) -> int:
    cfg, items, annotations, pipeline = _prepare_frames(args, cfg)
    if args.detector == "oracle" and annotations is None:
        raise InputError("the oracle detector needs --annotations")

    start = time.perf_counter()
    results = process_frames(pipeline, items, args.jobs, args.method)
    elapsed = time.perf_counter() - start

    if all(r.skipped for r in results):
        raise DetectorProtocolError("detector failed on every frame")

    predictions = {r.frame_id: r.boxes for r in results}
    report = {
        "method": args.method,
        "frames": [r.to_dict() for r in results],
        "invocations": sum(r.invocations for r in results),
        "skipped_frames": sum(r.skipped for r in results),
        "elapsed_seconds": elapsed,
    }
    if annotations is not None:
        evaluation = evaluate(predictions, annotations, cfg.pipeline.iou_threshold, elapsed, len(results))
        report["evaluation"] = evaluation.to_dict()
        logger.info(
            f"1-precision={evaluation.one_minus_precision:.4f} recall={evaluation.recall:.4f} "
            f"f1={evaluation.f1:.4f} fps={evaluation.frames_per_second:.2f}"
        )
    if args.pred:
        write_predictions(args.pred, predictions)
    if args.report:
        write_json(args.report, report)
    else:
        sys.stdout.write(dumps_json({k: v for k, v in report.items() if k != "frames"}))
    return 0


def cmd_bench(args, cfg: EngineConfig) -> int:
    if args.repeat < 1:
        raise InputError("--repeat must be >= 1")
    cfg, items, _, pipeline = _prepare_frames(args, cfg)
    results = []
    for _ in range(args.repeat):
        results.extend(process_frames(pipeline, items, args.jobs, args.method))

    table = timing_table(results)
    for stage, row in table.iterrows():
        logger.info(f"{stage:12s} mean {format_ms(row['mean'])}  p95 {format_ms(row['p95'])}")
    summary = {
        "frames": len(results),
        "stages": {stage: {"mean": row["mean"], "p95": row["p95"]} for stage, row in table.iterrows()},
        "invocations_mean": sum(r.invocations for r in results) / len(results),
        "fallback_frames": sum(1 for r in results if r.compose_report and r.compose_report.used_fallback),
    }
    if args.report:
        write_json(args.report, summary)
    else:
        sys.stdout.write(dumps_json(summary))
    return 0


def cmd_eval(args, cfg: EngineConfig) -> int:
    if not 0.0 < args.iou <= 1.0:
        raise InputError(f"--iou must be in (0, 1], got {args.iou}")
    report = evaluate(read_predictions(args.pred), read_annotations(args.gt), args.iou).to_dict()
    if args.report:
        write_json(args.report, report)
    sys.stdout.write(dumps_json(report))
    return 0


def cmd_oracle(args, cfg: EngineConfig) -> int:
    frame_size = _frame_size(args, cfg)
    patches = read_patches(args.patches)
    result = brute_force_min_subframes(
        patches, cfg.pipeline.detector_size, frame_size, cfg.ga.grid_stride, cfg.ga.n_r
    )
    if args.out:
        write_plan(args.out, result.plan)
    sys.stdout.write(dumps_json({"n_min": result.n_min, "witness": plan_to_dict(result.plan)}))
    return 0


COMMANDS = {
    "extract": cmd_extract,
    "compose": cmd_compose,
    "render": cmd_render,
    "run": cmd_run,
    "bench": cmd_bench,
    "eval": cmd_eval,
    "oracle": cmd_oracle,
}


def main(argv: Optional[List[str]] = None) -> int:
    """
    Entry point CLI

    Returns:
        Exit code: 0 sukses, 2 input salah, 3 detector gagal, 4 komposisi infeasible
    """
    parser = _build_parser()
    args = parser.parse_args(argv)

    if args.print_default_config:
        sys.stdout.write(default_config_text())
        return 0
    if not args.command:
        parser.print_usage(sys.stderr)
        return 2

    _setup_logging(args.verbose, args.quiet)
    # Muat variabel environment
    load_dotenv()

    try:
        cfg = load_config(getattr(args, "config", None))
        return COMMANDS[args.command](args, cfg)
    except CompositionEngineError as e:
        sys.stderr.write(f"error: {e}\n")
        return e.exit_code
    except OSError as e:
        sys.stderr.write(f"error: {e}\n")
        return 2
    finally:
        close_external_detectors()


if __name__ == "__main__":
    sys.exit(main())
