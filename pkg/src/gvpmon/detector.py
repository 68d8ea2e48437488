"""Detection ingestion, the external adapter protocol, NMS and waste counting.

Wire format (detections file and adapter stdout), one JSON object per line::

    {"frame_id": "20240101_000000", "ts": 1704047400,
     "boxes": [{"x": 10.0, "y": 20.0, "w": 30.0, "h": 15.0, "conf": 0.8, "cls": 0}]}

Box coordinates are pixels with a top-left origin. An adapter reads one frame
path per line on stdin and must answer with exactly one record per path, in
order; EOF on stdin means no more frames.
"""

from __future__ import annotations

import json
import logging
import os
import queue
import shlex
import subprocess
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    AdapterCrashed,
    DuplicateFrameId,
    NonMonotonicTimestamps,
    ParseError,
    ProtocolViolation,
    ValidationError,
)
from .geometry import WASTE, BBox, Detection, FrameRecord, iou_matrix

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DetectorConfig:
    confidence_threshold: float = 0.25
    nms_iou_threshold: float = 0.45
    class_filter: frozenset[int] | None = None
    adapter_cmd: str | None = None
    target_w: int = 700
    target_h: int = 395

    def __post_init__(self):
        for name in ("confidence_threshold", "nms_iou_threshold"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValidationError(f"{name} must be in [0, 1], got {v}")
        if self.class_filter is not None and not isinstance(self.class_filter, frozenset):
            object.__setattr__(self, "class_filter", frozenset(self.class_filter))


class DetectionStream(Sequence[FrameRecord]):
    """Frame records with strictly increasing timestamps and unique ids."""

    def __init__(self, records: Iterable[FrameRecord] = ()):
        self._records = tuple(records)
        validate_records(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def __getitem__(self, i):
        return self._records[i]

    def __iter__(self) -> Iterator[FrameRecord]:
        return iter(self._records)

    def __eq__(self, other) -> bool:
        if isinstance(other, DetectionStream):
            return self._records == other._records
        return NotImplemented

    def __repr__(self) -> str:
        return f"DetectionStream({len(self._records)} frames)"

    @property
    def records(self) -> tuple[FrameRecord, ...]:
        return self._records


def validate_records(records: Sequence[FrameRecord]) -> None:
    seen = set()
    prev = None
    for i, rec in enumerate(records):
        if rec.frame_id in seen:
            raise DuplicateFrameId(f"frame id {rec.frame_id!r} repeated (record {i + 1})")
        seen.add(rec.frame_id)
        if prev is not None and rec.timestamp <= prev:
            raise NonMonotonicTimestamps(
                f"record {i + 1} ({rec.frame_id}) has ts {rec.timestamp} after {prev}"
            )
        prev = rec.timestamp


def record_from_json(obj: dict) -> FrameRecord:
    frame_id = obj["frame_id"]
    ts = obj["ts"]
    if not isinstance(frame_id, str):
        raise TypeError("frame_id must be a string")
    if isinstance(ts, bool) or not isinstance(ts, int):
        raise TypeError("ts must be an integer")
    dets = []
    for b in obj.get("boxes", []):
        box = BBox(float(b["x"]), float(b["y"]), float(b["w"]), float(b["h"]))
        dets.append(Detection(box, float(b["conf"]), int(b.get("cls", WASTE))))
    return FrameRecord(frame_id, ts, tuple(dets))


def record_to_json(rec: FrameRecord) -> dict:
    return {
        "frame_id": rec.frame_id,
        "ts": rec.timestamp,
        "boxes": [
            {"x": d.box.x, "y": d.box.y, "w": d.box.w, "h": d.box.h, "conf": d.confidence, "cls": d.class_id}
            for d in rec.detections
        ],
    }


def parse_record_line(line: str, lineno: int | None = None, path: str | None = None) -> FrameRecord:
    try:
        return record_from_json(json.loads(line))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad detection record: {exc}", lineno, path) from None


def load_detections(path: str | os.PathLike) -> DetectionStream:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            records.append(parse_record_line(line, lineno, str(path)))
    return DetectionStream(records)


def write_detections(stream: Iterable[FrameRecord], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in stream:
            fh.write(json.dumps(record_to_json(rec)) + "\n")


# --- external adapter --------------------------------------------------------


def iter_adapter(
    cfg: DetectorConfig,
    frames: Sequence[str | os.PathLike],
    timeout: float | None = None,
) -> Iterator[FrameRecord]:
    """Stream records from the adapter process as they arrive.

    A feeder thread writes frame paths to the adapter's stdin so a slow
    consumer never deadlocks the pipe; records are yielded in input order.
    """
    if not cfg.adapter_cmd:
        raise ValidationError("adapter_cmd is not configured")
    argv = shlex.split(cfg.adapter_cmd)
    env = dict(os.environ, GVP_TARGET_W=str(cfg.target_w), GVP_TARGET_H=str(cfg.target_h))
    try:
        proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
            env=env,
        )
    except OSError as exc:
        raise AdapterCrashed(-1, str(exc)) from None

    stderr_chunks: list[str] = []

    def feed():
        try:
            for f in frames:
                proc.stdin.write(f"{os.fspath(f)}\n")
            proc.stdin.close()
        except (BrokenPipeError, OSError):
            pass

    def drain_stderr():
        for chunk in proc.stderr:
            stderr_chunks.append(chunk)

    feeder = threading.Thread(target=feed, daemon=True)
    errdrain = threading.Thread(target=drain_stderr, daemon=True)
    feeder.start()
    errdrain.start()

    expected = [Path(f).stem for f in frames]
    n = 0
    try:
        for line in proc.stdout:
            if not line.strip():
                continue
            if n >= len(expected):
                raise ProtocolViolation(f"adapter emitted more than {len(expected)} records")
            try:
                rec = parse_record_line(line, n + 1, "<adapter>")
            except ParseError as exc:
                raise ProtocolViolation(str(exc)) from None
            if rec.frame_id != expected[n]:
                raise ProtocolViolation(
                    f"record {n + 1} is for frame {rec.frame_id!r}, expected {expected[n]!r}"
                )
            n += 1
            yield rec
        rc = proc.wait(timeout=timeout)
        errdrain.join(timeout=5)
        if rc != 0:
            raise AdapterCrashed(rc, "".join(stderr_chunks))
        if n != len(expected):
            raise ProtocolViolation(f"adapter emitted {n} records for {len(expected)} frames")
    finally:
        if proc.poll() is None:
            proc.kill()
            proc.wait()
        feeder.join(timeout=5)


def run_adapter(cfg: DetectorConfig, frames: Sequence[str | os.PathLike], maxsize: int = 64) -> DetectionStream:
    """Run the configured adapter over ``frames`` and collect a validated stream.

    Records pass through a bounded queue so a consumer thread and the adapter
    overlap; each frame is delivered exactly once.
    """
    q: queue.Queue = queue.Queue(maxsize=maxsize)
    done = object()
    failure: list[BaseException] = []

    def produce():
        try:
            for rec in iter_adapter(cfg, frames):
                q.put(rec)
        except BaseException as exc:  # re-raised in the caller's thread
            failure.append(exc)
        finally:
            q.put(done)

    t = threading.Thread(target=produce, daemon=True)
    t.start()
    records = []
    while True:
        item = q.get()
        if item is done:
            break
        records.append(item)
    t.join()
    if failure:
        raise failure[0]
    return DetectionStream(records)


# --- post-processing ---------------------------------------------------------


def nms(dets: Sequence[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy per-class non-maximum suppression.

    Boxes are visited by descending confidence (input order breaks ties); a box
    survives iff its IoU with every already kept box of its class is below
    ``iou_threshold``. Survivors are returned in their input order.
    """
    if not (0.0 <= iou_threshold <= 1.0):
        raise ValidationError(f"iou_threshold must be in [0, 1], got {iou_threshold}")
    n = len(dets)
    if n <= 1:
        return list(dets)
    order = sorted(range(n), key=lambda i: -dets[i].confidence)
    xyxy = np.array([d.box.as_xyxy() for d in dets], dtype=np.float64)
    ious = iou_matrix(xyxy, xyxy).tolist()
    kept: dict[int, list[int]] = {}
    keep = [False] * n
    for i in order:
        same = kept.setdefault(dets[i].class_id, [])
        row = ious[i]
        if all(row[j] < iou_threshold for j in same):
            same.append(i)
            keep[i] = True
    return [d for d, k in zip(dets, keep) if k]


def filter_detections(dets: Sequence[Detection], cfg: DetectorConfig, apply_nms: bool = True) -> list[Detection]:
    kept = [
        d
        for d in dets
        if d.confidence >= cfg.confidence_threshold
        and (cfg.class_filter is None or d.class_id in cfg.class_filter)
    ]
    if apply_nms:
        kept = nms(kept, cfg.nms_iou_threshold)
    return kept


def waste_detections(rec: FrameRecord, cfg: DetectorConfig) -> list[Detection]:
    return [d for d in filter_detections(rec.detections, cfg) if d.class_id == WASTE]


def waste_count(rec: FrameRecord, cfg: DetectorConfig) -> int:
    """Number of waste boxes surviving the confidence filter and NMS."""
    return len(waste_detections(rec, cfg))
