"""Command-line interface.

Subcommands:

* ``estimate``     -- run the pipeline over a detection-frame log (JSONL)
* ``simulate``     -- emit a synthetic detection log plus ground truth
* ``experiment-a`` -- angular-accuracy grid sweep (CSV + SVG heatmaps)
* ``experiment-b`` -- floor-goal accuracy sweep (CSV + text table)
* ``bench``        -- per-frame latency of the geometry pipeline

Exit codes: 0 success, 1 usage/config error, 2 input-data error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .frames import DetectionFrame, frame_to_line, read_frames
from .geometry import CameraIntrinsics, default_intrinsics
from .pointing import EstimatorParams, estimate_frame, result_to_line
from .roi import KeypointStrategy
from .reports import (
    angle_cells_heatmap,
    angle_cells_to_csv,
    format_goal_table,
    goal_cells_to_csv,
    polar_heatmap_svg,
    write_text,
)
from .simulate import (
    FRAME_RATE_HZ,
    NoiseModel,
    Scenario,
    ScenarioError,
    SubjectModel,
    default_scenario,
    run_experiment_a,
    run_experiment_b,
    simulate_log,
    summarize_goal_by_distance,
    synthesize_frame,
    truth_to_dict,
    validate_scenario_strict,
)
from .tracking import (
    DetectionTracker,
    GateParams,
    GoalGate,
    TrackerParams,
    commit_to_dict,
)
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # keep argparse from sys.exit(2)
        raise UsageError(message)


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--strategy",
        default="mean",
        choices=[s.value for s in KeypointStrategy],
        help="keypoint depth statistic (default: mean)",
    )
    p.add_argument("--cobb-ratio", type=float, default=0.35,
                   help="center-circle radius as a fraction of min(w, h) (default: 0.35)")
    p.add_argument("--eps", type=float, default=0.15,
                   help="DBSCAN depth radius in meters (default: 0.15)")
    p.add_argument("--min-pts", type=int, default=4,
                   help="DBSCAN minimum neighbors incl. self (default: 4)")
    p.add_argument("--intrinsics", default=None,
                   help="intrinsics JSON file (default: bundled 640x480 68-deg sensor)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pointray", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"pointray {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_est = sub.add_parser("estimate", help="run the pipeline over a frame log")
    _add_pipeline_flags(p_est)
    p_est.add_argument("--input", "-i", default="-", help="frame log path or - for stdin")
    p_est.add_argument("--output", "-o", default="-", help="estimate log path or - for stdout")
    p_est.add_argument("--track", action="store_true",
                       help="smooth detections with the Kalman tracker")
    p_est.add_argument("--track-sigma-accel", type=float, default=200.0)
    p_est.add_argument("--track-sigma-meas", type=float, default=4.0)
    p_est.add_argument("--track-miss-limit", type=int, default=5)
    p_est.add_argument("--gate", action="store_true",
                       help="emit committed goals from the covariance gate")
    p_est.add_argument("--gate-window", type=int, default=30)
    p_est.add_argument("--gate-tau", type=float, default=0.01)
    p_est.add_argument("--gate-tau-angle", type=float, default=4.0)
    p_est.add_argument("--gate-mode", choices=["goal", "direction"], default="goal")
    p_est.add_argument("--gate-max-age", type=float, default=1.0)

    p_sim = sub.add_parser("simulate", help="emit a synthetic detection log")
    p_sim.add_argument("--scenario", default=None, help="scenario JSON (default: bundled)")
    p_sim.add_argument("--aim", choices=["directions", "targets"], default="directions",
                       help="point along scenario directions or at floor targets")
    p_sim.add_argument("--output", "-o", default="-", help="frame log path or - for stdout")
    p_sim.add_argument("--truth", default=None, help="optional ground-truth JSONL path")
    p_sim.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_sim.add_argument("--intrinsics", default=None)

    p_expa = sub.add_parser("experiment-a", help="angular-accuracy grid sweep")
    _add_pipeline_flags(p_expa)
    p_expa.add_argument("--scenario", default=None)
    p_expa.add_argument("--strategies", default="mean,median,closest,dbscan",
                        help="comma-separated strategies to evaluate")
    p_expa.add_argument("--frames", type=int, default=None,
                        help="frames per grid cell (default: scenario value)")
    p_expa.add_argument("--jobs", type=int, default=1, help="parallel workers over cells")
    p_expa.add_argument("--seed", type=int, default=None)
    p_expa.add_argument("--outdir", required=True, help="output directory for artifacts")

    p_expb = sub.add_parser("experiment-b", help="floor-goal accuracy sweep")
    _add_pipeline_flags(p_expb)
    p_expb.add_argument("--scenario", default=None)
    p_expb.add_argument("--frames", type=int, default=None)
    p_expb.add_argument("--jobs", type=int, default=1)
    p_expb.add_argument("--seed", type=int, default=None)
    p_expb.add_argument("--outdir", required=True)

    p_bench = sub.add_parser("bench", help="per-frame latency of the geometry pipeline")
    _add_pipeline_flags(p_bench)
    p_bench.add_argument("--frames", type=int, default=1000)
    p_bench.add_argument("--samples", type=int, default=5000,
                         help="total ROI samples per synthetic frame")
    p_bench.add_argument("--seed", type=int, default=42)
    return parser


def _load_intrinsics(path: str | None) -> CameraIntrinsics:
    if path is None:
        return default_intrinsics()
    try:
        return CameraIntrinsics.load(path)
    except FileNotFoundError as exc:
        raise DataError(f"cannot read intrinsics file: {exc}") from exc
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"bad intrinsics file {path}: {exc}") from exc


def _load_scenario(path: str | None, seed: int | None) -> Scenario:
    if path is None:
        scenario = default_scenario()
    else:
        try:
            scenario = Scenario.load(path)
        except FileNotFoundError as exc:
            raise DataError(f"cannot read scenario file: {exc}") from exc
        except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
            raise UsageError(f"bad scenario file {path}: {exc}") from exc
    if seed is not None:
        scenario = Scenario.from_dict({**scenario.to_dict(), "seed": seed})
    return scenario


def _params_from_args(args) -> EstimatorParams:
    try:
        return EstimatorParams(
            cobb_ratio=args.cobb_ratio,
            dbscan_eps=args.eps,
            dbscan_min_pts=args.min_pts,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _open_out(path: str):
    if path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8"), True


def cmd_estimate(args) -> int:
    intr = _load_intrinsics(args.intrinsics)
    params = _params_from_args(args)
    strategy = KeypointStrategy.from_name(args.strategy)
    tracker = None
    if args.track:
        tracker = DetectionTracker(TrackerParams(
            sigma_accel=args.track_sigma_accel,
            sigma_meas=args.track_sigma_meas,
            miss_limit=args.track_miss_limit,
            image_width=intr.width,
        ))
    gate = None
    if args.gate:
        try:
            gate = GoalGate(GateParams(
                window=args.gate_window,
                tau=args.gate_tau,
                tau_angle=args.gate_tau_angle,
                mode=args.gate_mode,
                max_age_s=args.gate_max_age,
            ))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc

    if args.input == "-":
        lines = sys.stdin
    else:
        try:
            lines = open(args.input, "r", encoding="utf-8")
        except OSError as exc:
            raise DataError(f"cannot read input: {exc}") from exc

    skipped = 0

    def on_skip(line_no: int, message: str) -> None:
        nonlocal skipped
        skipped += 1
        print(f"warning: line {line_no} skipped: {message}", file=sys.stderr)

    out, close_out = _open_out(args.output)
    frames = 0
    estimates = 0
    commits = 0
    prev_t = None
    start = time.perf_counter()
    try:
        for frame in read_frames(lines, errors="skip", on_skip=on_skip):
            if tracker is not None:
                frame = _smooth_frame(tracker, frame, prev_t)
            prev_t = frame.timestamp
            result = estimate_frame(frame, strategy, params, intr)
            frames += 1
            if result.estimate is not None:
                estimates += 1
            out.write(result_to_line(result) + "\n")
            if gate is not None:
                est = result.estimate
                commit = gate.update(
                    result.timestamp,
                    result.goal,
                    None if est is None else est.pitch_deg,
                    None if est is None else est.yaw_deg,
                )
                if commit is not None:
                    commits += 1
                    out.write(json.dumps(commit_to_dict(commit), separators=(",", ":")) + "\n")
    finally:
        if close_out:
            out.close()
        if lines is not sys.stdin:
            lines.close()
    elapsed = time.perf_counter() - start
    fps = frames / elapsed if elapsed > 0 else float("inf")
    print(
        f"frames: {frames}  estimates: {estimates}  yield: {estimates}/{frames}"
        f"  skipped: {skipped}  commits: {commits}  fps: {fps:.0f}",
        file=sys.stderr,
    )
    return EXIT_OK


def _smooth_frame(tracker: DetectionTracker, frame, prev_t):
    dt = (frame.timestamp - prev_t) if prev_t is not None else 1.0 / FRAME_RATE_HZ
    rois = ([frame.face] if frame.face is not None else []) + list(frame.hands)
    detections = [roi.source_bbox for roi in rois]
    smoothed = tracker.step(detections, dt)
    face = None
    hands = []
    for roi, tracked in zip(rois, smoothed):
        updated = roi.with_bbox(tracked.bbox)
        if updated.label == "face":
            face = updated
        else:
            hands.append(updated)
    return DetectionFrame(frame.timestamp, face, tuple(hands))


def cmd_simulate(args) -> int:
    intr = _load_intrinsics(args.intrinsics)
    scenario = _load_scenario(args.scenario, args.seed)
    validate_scenario_strict(scenario, intr)
    use_targets = args.aim == "targets"
    if use_targets and not scenario.floor_targets:
        raise UsageError("scenario has no floor_targets to aim at")
    if not use_targets and not scenario.directions:
        raise UsageError("scenario has no directions to point along")
    out, close_out = _open_out(args.output)
    truth_out = open(args.truth, "w", encoding="utf-8") if args.truth else None
    n = 0
    try:
        for frame, truth in simulate_log(scenario, intr, use_targets=use_targets):
            out.write(frame_to_line(frame) + "\n")
            if truth_out is not None:
                truth_out.write(
                    json.dumps(truth_to_dict(truth, frame.timestamp), separators=(",", ":"))
                    + "\n"
                )
            n += 1
    finally:
        if close_out:
            out.close()
        if truth_out is not None:
            truth_out.close()
    print(f"frames written: {n}", file=sys.stderr)
    return EXIT_OK


def cmd_experiment_a(args) -> int:
    intr = _load_intrinsics(args.intrinsics)
    scenario = _load_scenario(args.scenario, args.seed)
    validate_scenario_strict(scenario, intr)
    params = _params_from_args(args)
    try:
        strategies = tuple(
            KeypointStrategy.from_name(s.strip()) for s in args.strategies.split(",") if s.strip()
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if not strategies:
        raise UsageError("no strategies selected")
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cells = run_experiment_a(
        scenario, intr, strategies=strategies, params=params,
        frames_per_cell=args.frames, jobs=args.jobs,
    )
    write_text(outdir / "angle_cells.csv", angle_cells_to_csv(cells))
    for strategy in strategies:
        values, ranges, bearings = angle_cells_heatmap(cells, strategy.value)
        svg = polar_heatmap_svg(
            values, ranges, bearings,
            title=f"Mean pointing error ({strategy.value} depth)", unit="deg",
        )
        write_text(outdir / f"heatmap_{strategy.value}.svg", svg)
    summary = _experiment_a_summary(cells, strategies)
    write_text(outdir / "summary.txt", summary)
    print(summary, end="", file=sys.stderr)
    return EXIT_OK


def _experiment_a_summary(cells, strategies) -> str:
    lines = ["Angular error by range (mean over bearings and directions)", ""]
    header = f"{'range (m)':>10}" + "".join(f"  {s.value:>10}" for s in strategies)
    lines.append(header + "      yield (" + "/".join(s.value for s in strategies) + ")")
    ranges = sorted({c.range_m for c in cells})
    for r in ranges:
        row = f"{r:>10.1f}"
        yields = []
        for s in strategies:
            group = [c for c in cells if c.range_m == r and c.strategy == s.value]
            errs = np.concatenate([c.err_deg for c in group]) if group else np.array([])
            errs = errs[~np.isnan(errs)]
            row += f"  {np.mean(errs):>10.2f}" if errs.size else f"  {'n/a':>10}"
            total = sum(c.frames for c in group)
            got = sum(c.estimates for c in group)
            yields.append(f"{got / total:.2f}" if total else "n/a")
        lines.append(row + "      " + "/".join(yields))
    return "\n".join(lines) + "\n"


def cmd_experiment_b(args) -> int:
    intr = _load_intrinsics(args.intrinsics)
    scenario = _load_scenario(args.scenario, args.seed)
    validate_scenario_strict(scenario, intr)
    params = _params_from_args(args)
    strategy = KeypointStrategy.from_name(args.strategy)
    if not scenario.floor_targets:
        raise UsageError("scenario has no floor_targets")
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cells = run_experiment_b(
        scenario, intr, strategy=strategy, params=params,
        frames_per_cell=args.frames, jobs=args.jobs,
    )
    write_text(outdir / "goal_cells.csv", goal_cells_to_csv(cells))
    table = format_goal_table(summarize_goal_by_distance(cells), strategy.value)
    write_text(outdir / "goal_table.txt", table)
    print(table, end="", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args) -> int:
    intr = _load_intrinsics(args.intrinsics)
    params = _params_from_args(args)
    strategy = KeypointStrategy.from_name(args.strategy)
    subject = SubjectModel()
    pose = (2.0, 0.0)
    per_roi = max(args.samples // 2, 1)
    noise = NoiseModel(
        n0=per_roi * pose[0] ** 2, n_min=1, beta=0.0, p_drop_max=0.0,
        sigma0=0.004, bbox_jitter_px=1.0,
    )
    rng = np.random.default_rng(args.seed)
    frames = [
        synthesize_frame(
            subject, pose, direction=(35.0, 10.0), noise=noise, intr=intr,
            rng=rng, timestamp=i / FRAME_RATE_HZ,
        )[0]
        for i in range(args.frames)
    ]
    # warmup
    for frame in frames[: min(50, len(frames))]:
        estimate_frame(frame, strategy, params, intr)
    timings = np.empty(len(frames))
    for i, frame in enumerate(frames):
        t0 = time.perf_counter()
        estimate_frame(frame, strategy, params, intr)
        timings[i] = time.perf_counter() - t0
    ms = np.sort(timings) * 1000.0
    p50 = float(np.percentile(ms, 50))
    p99 = float(np.percentile(ms, 99))
    fps = 1000.0 / float(np.mean(ms))
    n_samples = len(frames[0].face) + sum(len(h) for h in frames[0].hands)
    print(f"frames: {len(frames)}  roi samples/frame: ~{n_samples}  strategy: {strategy.value}")
    print(f"latency p50: {p50:.3f} ms  p99: {p99:.3f} ms  mean: {float(np.mean(ms)):.3f} ms")
    print(f"throughput: {fps:.0f} frames/sec")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "estimate":
            return cmd_estimate(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "experiment-a":
            return cmd_experiment_a(args)
        if args.command == "experiment-b":
            return cmd_experiment_b(args)
        if args.command == "bench":
            return cmd_bench(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScenarioError as exc:
        print("error: invalid scenario:", file=sys.stderr)
        for e in exc.errors:
            print(f"  - {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
