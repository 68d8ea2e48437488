"""Command-line entry point: ``gvpmon <command> [options]``.

Every command reads the optional YAML config (``--config``), applies flag
overrides, writes its outputs under ``--out`` and appends one record to
``<out>/runs.jsonl``.

Exit codes: 0 success, 2 validation error, 3 detector adapter failure,
4 I/O error.
"""

from __future__ import annotations

import argparse
import fcntl
import io
import json
import logging
import os
import sys
import time
import uuid
from dataclasses import replace
from pathlib import Path

from . import analytics, dataset, detector, evaluation, simulate
from .config import AppConfig, dump_config, load_config
from .errors import AdapterError, MissingInput, ValidationError

log = logging.getLogger("gvpmon")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_ADAPTER = 3
EXIT_IO = 4

LEDGER_NAME = "runs.jsonl"


# --- run bookkeeping ---------------------------------------------------------


class RunLedger:
    """Append-only JSONL log of command invocations."""

    def __init__(self, path: Path):
        self.path = Path(path)

    def append(self, record: dict) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        line = json.dumps(record, sort_keys=True) + "\n"
        fd = os.open(self.path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)
        try:
            fcntl.flock(fd, fcntl.LOCK_EX)
            os.write(fd, line.encode("utf-8"))
        finally:
            fcntl.flock(fd, fcntl.LOCK_UN)
            os.close(fd)

    def records(self) -> list[dict]:
        if not self.path.exists():
            return []
        with open(self.path, encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]


class Run:
    """Per-invocation context: resolved config, output dir and written files."""

    def __init__(self, cfg: AppConfig, args: argparse.Namespace):
        self.cfg = cfg
        self.args = args
        self.out = Path(cfg.paths.out_dir)
        self.outputs: list[str] = []

    def path(self, name: str) -> Path:
        return self.out / name

    def write_text(self, name: str, text: str) -> Path:
        p = self.path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
        self.outputs.append(name)
        return p

    def produced(self, name: str) -> Path:
        self.outputs.append(name)
        p = self.path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def say(self, text: str) -> None:
        if not getattr(self.args, "quiet", False):
            print(text)


def _require(path: Path | None, what: str, flag: str) -> Path:
    if path is None:
        raise MissingInput(f"no {what} given; pass {flag} or set it in the config")
    if not Path(path).exists():
        raise MissingInput(f"{what} {path} does not exist")
    return Path(path)


# --- commands ----------------------------------------------------------------


def cmd_sample(run: Run) -> None:
    a, cfg = run.args, run.cfg
    root = Path(a.frames) if a.frames else cfg.paths.frames_dir
    if root is None:
        raise MissingInput("no frames directory given; pass --frames or set paths.frames_dir")
    src = dataset.FrameSource(root, fps=a.fps)
    frames = src.frames()
    if not frames:
        raise dataset.EmptySource(f"no frames found in {root}")
    idx = dataset.sample_timestamps([f.timestamp for f in frames], a.interval)
    text = "".join(f"{frames[i].path}\n" for i in idx)
    run.write_text(a.output, text)
    run.say(f"sampled {len(idx)} of {len(frames)} frames at {a.interval:g} s -> {run.path(a.output)}")


def _read_frame_list(path: Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def cmd_prep(run: Run) -> None:
    a, cfg = run.args, run.cfg
    labels_dir = _require(Path(a.labels) if a.labels else cfg.paths.labels_dir, "labels directory", "--labels")
    unlabeled: list[str] = []
    if a.frame_list:
        unlabeled = [Path(p).stem for p in _read_frame_list(_require(Path(a.frame_list), "frame list", "--frame-list"))]
    ann = dataset.load_annotations(labels_dir)
    if unlabeled:
        ann.check_against(unlabeled)
    pre = dataset.Preprocess(cfg.frame_w, cfg.frame_h)
    manifest = dataset.split(ann, a.train_fraction, cfg.seed, unlabeled, pre)
    if a.flip_count:
        manifest = dataset.augment_flip(manifest, a.flip_count, cfg.seed)
    if a.blur_sigma is not None:
        manifest = dataset.add_blur(manifest, a.blur_sigma)
    dataset.write_manifest(manifest, run.produced(a.output))
    run.outputs.append(a.output + ".meta.json")
    counts = manifest.counts()
    run.say(json.dumps(counts, sort_keys=True))


def _frame_paths(run: Run) -> list[str]:
    a, cfg = run.args, run.cfg
    if a.frame_list:
        return _read_frame_list(_require(Path(a.frame_list), "frame list", "--frame-list"))
    default_list = run.path("frames.txt")
    if default_list.exists():
        return _read_frame_list(default_list)
    root = _require(cfg.paths.frames_dir, "frames directory", "--frame-list or paths.frames_dir")
    return [str(f.path) for f in dataset.FrameSource(root).frames()]


def cmd_detect(run: Run) -> None:
    a, cfg = run.args, run.cfg
    det_cfg = cfg.detector
    if a.adapter:
        det_cfg = replace(det_cfg, adapter_cmd=a.adapter)
    if a.detections or not det_cfg.adapter_cmd:
        src = _require(Path(a.detections) if a.detections else cfg.paths.detections, "detections file", "--detections")
        stream = detector.load_detections(src)
        how = f"loaded from {src}"
    else:
        frames = _frame_paths(run)
        if not frames:
            raise dataset.EmptySource("no frames to run the adapter on")
        stream = detector.run_adapter(det_cfg, frames)
        how = f"adapter {det_cfg.adapter_cmd!r}"
    detector.write_detections(stream, run.produced(a.output))
    n_boxes = sum(len(r.detections) for r in stream)
    run.say(f"{len(stream)} frames, {n_boxes} boxes ({how}) -> {run.path(a.output)}")


def _load_stream(run: Run) -> detector.DetectionStream:
    a, cfg = run.args, run.cfg
    if getattr(a, "detections", None):
        return detector.load_detections(_require(Path(a.detections), "detections file", "--detections"))
    if cfg.paths.detections is not None:
        return detector.load_detections(_require(cfg.paths.detections, "detections file", "--detections"))
    return detector.load_detections(_require(run.path("detections.jsonl"), "detections file", "--detections"))


def _series(run: Run) -> list[analytics.CoverageSample]:
    """Coverage from ``--coverage`` if given, else from ``<out>/coverage.csv``, else computed."""
    a, cfg = run.args, run.cfg
    path = Path(a.coverage) if getattr(a, "coverage", None) else None
    if path is not None:
        _require(path, "coverage file", "--coverage")
    elif run.path("coverage.csv").exists() and not getattr(a, "detections", None):
        path = run.path("coverage.csv")
    if path is not None:
        with open(path, encoding="utf-8", newline="") as fh:
            return analytics.read_coverage_csv(fh)
    return analytics.coverage_series(_load_stream(run), cfg.roi, cfg.detector, cfg.grid_scale)


def _write_series(run: Run, name: str, series) -> None:
    buf = io.StringIO()
    analytics.write_coverage_csv(series, buf, run.cfg.tz_offset_min)
    run.write_text(name, buf.getvalue())


def cmd_coverage(run: Run) -> None:
    cfg = run.cfg
    stream = _load_stream(run)
    series = analytics.coverage_series(stream, cfg.roi, cfg.detector, cfg.grid_scale)
    _write_series(run, run.args.output, series)
    mean = sum(s.coverage for s in series) / len(series) if series else 0.0
    run.say(f"{len(series)} samples, mean coverage {mean:.4f} -> {run.path(run.args.output)}")


def _evaluate(run: Run, labels_dir: Path) -> evaluation.EvalReport:
    cfg = run.cfg
    stream = _load_stream(run)
    ann = dataset.load_annotations(labels_dir)
    return evaluation.evaluate(stream, ann, cfg.detector, run.args.iou, cfg.frame_w, cfg.frame_h)


def cmd_eval(run: Run) -> None:
    a, cfg = run.args, run.cfg
    labels_dir = _require(Path(a.labels) if a.labels else cfg.paths.labels_dir, "labels directory", "--labels")
    report = _evaluate(run, labels_dir)
    run.write_text("eval.json", report.to_json())
    table = evaluation.report_table({a.name: report}, with_baselines=a.with_baselines)
    if a.with_baselines:
        table += "Baseline columns are published scores, shown for reference.\n"
    run.write_text("eval_table.txt", table)
    run.say(table.rstrip("\n"))


def cmd_profile(run: Run) -> None:
    a, cfg = run.args, run.cfg
    series = _series(run)
    kinds = sorted(analytics.PROFILE_KINDS) if a.kind == "all" else [a.kind]
    for kind in kinds:
        prof = analytics.profile(series, kind, cfg.tz_offset_min)
        run.write_text(f"profile_{kind}.csv", prof.to_csv())
        run.write_text(f"profile_{kind}.json", prof.to_json())
        peak = prof[prof.argmax()]
        run.say(f"{kind}: {len(prof)} bins, peak {peak.key} at {peak.mean:.4f}")


def _event_params(run: Run) -> analytics.EventParams:
    a = run.args
    p = run.cfg.events
    overrides = {k: getattr(a, k) for k in ("drop_rel", "rise_abs", "clean_level", "window") if getattr(a, k, None) is not None}
    return replace(p, **overrides)


def _events_text(events) -> str:
    buf = io.StringIO()
    analytics.write_events(events, buf)
    return buf.getvalue()


def cmd_events(run: Run) -> None:
    series = _series(run)
    events = analytics.detect_events(series, _event_params(run))
    run.write_text(run.args.output, _events_text(events))
    counts = {k: sum(e.kind == k for e in events) for k in (analytics.DUMP, analytics.PILE, analytics.CLEAR)}
    run.say(f"{len(events)} events {json.dumps(counts)} -> {run.path(run.args.output)}")


def _scenario(run: Run) -> simulate.ScenarioConfig:
    a = run.args
    sc = simulate.load_scenario(_require(Path(a.scenario), "scenario file", "--scenario")) if a.scenario else simulate.ScenarioConfig()
    changes = {}
    if a.days is not None:
        changes["days"] = a.days
    if getattr(a, "seed", None) is not None:
        changes["seed"] = a.seed
    if getattr(a, "tz_offset", None) is not None:
        changes["tz_offset_min"] = a.tz_offset
    if a.noiseless:
        changes.update(p_miss=0.0, clutter_rate=0.0, target_precision=None, jitter_sigma=0.0)
    return replace(sc, **changes) if changes else sc


def cmd_simulate(run: Run) -> None:
    a = run.args
    sc = simulate.resolve(_scenario(run))
    out = simulate.generate(sc)
    run.write_text("scenario.yaml", simulate.dump_scenario(sc))
    detector.write_detections(out.detections, run.produced("detections.jsonl"))
    dataset.save_annotations(out.annotations, run.path("labels"))
    run.outputs.append("labels/")
    _write_series(run, "coverage_truth.csv", out.coverage)
    run.write_text("events_truth.jsonl", "".join(json.dumps({"kind": e.kind, "ts": e.ts}) + "\n" for e in out.events))
    summary = {"frames": len(out.detections), "gt_boxes": sum(len(v) for v in out.annotations.labels.values())}
    if sc.jitter_sigma <= min(sc.item_w[0], sc.item_h[0]) / 10:
        p, r = simulate.expected_metrics(sc)
        summary.update(expected_precision=round(p, 6), expected_recall=round(r, 6))
    run.write_text("expected.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    # Config for running the pipeline on this output. The simulated stream is
    # already one box per item, so suppression is disabled (IoU threshold 1).
    pipe = AppConfig(
        paths=replace(run.cfg.paths, frames_dir=Path("frames") if a.frames_step else None,
                      labels_dir=Path("labels"), detections=Path("detections.jsonl"), out_dir=Path(".")),
        frame_w=sc.frame_w,
        frame_h=sc.frame_h,
        roi_spec=sc.roi.to_dict(),
        detector=replace(run.cfg.detector, nms_iou_threshold=1.0, target_w=sc.frame_w, target_h=sc.frame_h),
        events=run.cfg.events,
        tz_offset_min=sc.tz_offset_min,
        grid_scale=run.cfg.grid_scale,
        seed=sc.seed,
    )
    run.write_text("pipeline.yaml", dump_config(pipe))
    if a.frames_step:
        n = simulate.write_placeholder_frames(run.path("frames"), sc, a.frames_step)
        run.outputs.append("frames/")
        summary["placeholder_frames"] = n
    run.say(json.dumps(summary, sort_keys=True))


def cmd_report(run: Run) -> None:
    a, cfg = run.args, run.cfg
    stream = _load_stream(run)
    series = analytics.coverage_series(stream, cfg.roi, cfg.detector, cfg.grid_scale)
    _write_series(run, "coverage.csv", series)
    lines = [f"frames: {len(series)}"]
    for kind in sorted(analytics.PROFILE_KINDS):
        prof = analytics.profile(series, kind, cfg.tz_offset_min)
        run.write_text(f"profile_{kind}.csv", prof.to_csv())
        run.write_text(f"profile_{kind}.json", prof.to_json())
        peak = prof[prof.argmax()]
        lines.append(f"{kind} peak: {peak.key} mean coverage {peak.mean:.4f}")
    events = analytics.detect_events(series, _event_params(run))
    run.write_text("events.jsonl", _events_text(events))
    for k in (analytics.DUMP, analytics.PILE, analytics.CLEAR):
        lines.append(f"{k} events: {sum(e.kind == k for e in events)}")
    labels_dir = Path(a.labels) if a.labels else cfg.paths.labels_dir
    if labels_dir is not None:
        report = evaluation.evaluate(stream, dataset.load_annotations(_require(labels_dir, "labels directory", "--labels")),
                                     cfg.detector, a.iou, cfg.frame_w, cfg.frame_h)
        run.write_text("eval.json", report.to_json())
        table = evaluation.report_table({a.name: report}, with_baselines=a.with_baselines)
        run.write_text("eval_table.txt", table)
        lines.append("")
        lines.append(table.rstrip("\n"))
    text = "\n".join(lines) + "\n"
    run.write_text("report.txt", text)
    run.say(text.rstrip("\n"))


# --- argument parsing ----------------------------------------------------------


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    g = p.add_argument_group("global options")
    g.add_argument("--config", metavar="PATH", default=d, help="YAML config file")
    g.add_argument("--out", metavar="DIR", default=d, help="output directory (default: paths.out_dir or gvp-out)")
    g.add_argument("--seed", type=int, metavar="INT", default=d, help="seed for splits, augmentation and simulation")
    g.add_argument("--tz-offset", type=int, metavar="MINUTES", default=d, help="local time offset from UTC (default 330)")
    g.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS if suppress else False,
                   help="only report errors")


def _eval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--labels", metavar="DIR", help="YOLO label directory (default: paths.labels_dir)")
    p.add_argument("--iou", type=float, default=0.5, help="IoU match threshold (default 0.5)")
    p.add_argument("--name", default="model", help="column name for this run in the table")
    p.add_argument("--with-baselines", action="store_true", help="add the published reference columns")


def _event_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--drop-rel", type=float, help="relative fall for pile/clear (default 0.5)")
    p.add_argument("--rise-abs", type=float, help="absolute rise for a dump and minimum fall (default 0.05)")
    p.add_argument("--clean-level", type=float, help="coverage at or below which a fall is a clear (default 0.05)")
    p.add_argument("--window", type=int, help="look-back window in seconds (default 1800)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gvpmon", description=__doc__.split("\n\n")[0])
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        _global_flags(p, suppress=True)
        p.set_defaults(func=fn)
        return p

    p = add("sample", cmd_sample, "keep one frame per interval and write the frame list")
    p.add_argument("--frames", metavar="DIR", help="directory of YYYYMMDD_HHMMSS images (default: paths.frames_dir)")
    p.add_argument("--interval", type=float, default=300.0, help="seconds between kept frames (default 300)")
    p.add_argument("--fps", type=float, default=30.0, help="frame rate of the source video, for provenance")
    p.add_argument("--output", default="frames.txt", help="frame list name inside --out")

    p = add("prep", cmd_prep, "split annotations into train/test and add flipped copies")
    p.add_argument("--labels", metavar="DIR", help="YOLO label directory (default: paths.labels_dir)")
    p.add_argument("--frame-list", metavar="FILE", help="sampled frames; those without labels form the unlabeled pool")
    p.add_argument("--train-fraction", type=float, default=0.8, help="share of annotated frames used for training")
    p.add_argument("--flip-count", type=int, default=0, help="number of horizontally flipped train copies to add")
    p.add_argument("--blur-sigma", type=float, help="also tag augmented copies with a Gaussian blur")
    p.add_argument("--output", default="manifest.jsonl", help="manifest name inside --out")

    p = add("detect", cmd_detect, "run the detector adapter, or load a detections file, and store the stream")
    p.add_argument("--adapter", metavar="CMD", help="adapter command line (default: detector.adapter_cmd)")
    p.add_argument("--frame-list", metavar="FILE", help="frames to process (default: <out>/frames.txt)")
    p.add_argument("--detections", metavar="FILE", help="load this detections file instead of running an adapter")
    p.add_argument("--output", default="detections.jsonl", help="stream name inside --out")

    p = add("coverage", cmd_coverage, "compute per-frame ROI coverage from detections")
    p.add_argument("--detections", metavar="FILE", help="detections file (default: paths.detections or <out>/detections.jsonl)")
    p.add_argument("--output", default="coverage.csv", help="CSV name inside --out")

    p = add("eval", cmd_eval, "score detections against ground truth")
    p.add_argument("--detections", metavar="FILE", help="detections file (default: paths.detections or <out>/detections.jsonl)")
    _eval_flags(p)

    p = add("profile", cmd_profile, "hourly, daily or weekday coverage profiles")
    p.add_argument("--kind", choices=["hourly", "daily", "weekday", "all"], default="all")
    p.add_argument("--coverage", metavar="FILE", help="coverage CSV (default: <out>/coverage.csv, else computed)")
    p.add_argument("--detections", metavar="FILE", help="compute coverage from this detections file")

    p = add("events", cmd_events, "detect dump, pile and clear events in the coverage series")
    p.add_argument("--coverage", metavar="FILE", help="coverage CSV (default: <out>/coverage.csv, else computed)")
    p.add_argument("--detections", metavar="FILE", help="compute coverage from this detections file")
    p.add_argument("--output", default="events.jsonl", help="event log name inside --out")
    _event_flags(p)

    p = add("simulate", cmd_simulate, "generate a synthetic campaign with ground truth")
    p.add_argument("--scenario", metavar="FILE", help="scenario YAML (default: built-in 60-day scenario)")
    p.add_argument("--days", type=int, help="override the number of days")
    p.add_argument("--noiseless", action="store_true", help="perfect detector: no misses, clutter or jitter")
    p.add_argument("--frames-step", type=int, metavar="SEC", help="also write empty placeholder frames every SEC seconds")

    p = add("report", cmd_report, "coverage, profiles, events and (with labels) evaluation in one go")
    p.add_argument("--detections", metavar="FILE", help="detections file (default: paths.detections or <out>/detections.jsonl)")
    _eval_flags(p)
    _event_flags(p)
    return parser


def _resolve_config(args: argparse.Namespace) -> AppConfig:
    cfg = load_config(_require(Path(args.config), "config file", "--config")) if args.config else AppConfig()
    if args.out:
        cfg.paths.out_dir = Path(args.out)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.tz_offset is not None:
        cfg.tz_offset_min = args.tz_offset
    return cfg


def _arg_summary(args: argparse.Namespace) -> dict:
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items()) if k != "func"}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.INFO,
        format="gvpmon: %(levelname)s: %(message)s",
    )
    start = time.time()
    out_dir = Path(args.out) if args.out else Path("gvp-out")
    record = {"run_id": uuid.uuid4().hex, "command": args.command, "argv": list(sys.argv[1:] if argv is None else argv)}
    run = None
    code = EXIT_OK
    try:
        cfg = _resolve_config(args)
        out_dir = cfg.paths.out_dir
        record["config_hash"] = cfg.digest(_arg_summary(args))
        run = Run(cfg, args)
        args.func(run)
    except ValidationError as exc:
        code = EXIT_VALIDATION
        record["error"] = f"{type(exc).__name__}: {exc}"
    except AdapterError as exc:
        code = EXIT_ADAPTER
        record["error"] = f"{type(exc).__name__}: {exc}"
    except OSError as exc:
        code = EXIT_IO
        record["error"] = f"{type(exc).__name__}: {exc}"
    if code != EXIT_OK:
        print(f"gvpmon {args.command}: {record['error']}", file=sys.stderr)
    record.update(
        start_ts=round(start, 3),
        end_ts=round(time.time(), 3),
        exit_code=code,
        outputs=run.outputs if run else [],
    )
    record.setdefault("config_hash", None)
    try:
        RunLedger(Path(out_dir) / LEDGER_NAME).append(record)
    except OSError as exc:
        log.warning("could not append to run ledger: %s", exc)
        if code == EXIT_OK:
            code = EXIT_IO
    return code


if __name__ == "__main__":
    sys.exit(main())
