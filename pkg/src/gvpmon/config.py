"""Application configuration: one YAML file, overridable from the command line.

Example::

    paths:
      frames_dir: frames/
      labels_dir: labels/
      detections: out/detections.jsonl
      out_dir: out/
    frame: {width: 700, height: 395}
    roi: {rect: [50, 100, 600, 280]}
    detector:
      confidence_threshold: 0.25
      nms_iou_threshold: 0.45
      adapter_cmd: python -m gvpmon.adapters.empty
    events: {drop_rel: 0.5, rise_abs: 0.05, clean_level: 0.05, window: 1800}
    tz_offset_min: 330
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .analytics import DEFAULT_TZ_OFFSET_MIN, EventParams
from .detector import DetectorConfig
from .errors import InvalidConfig, ValidationError
from .geometry import RoiPolygon, parse_roi, roi_to_spec


@dataclass
class Paths:
    frames_dir: Path | None = None
    labels_dir: Path | None = None
    detections: Path | None = None
    out_dir: Path = Path("gvp-out")


@dataclass
class AppConfig:
    paths: Paths = field(default_factory=Paths)
    frame_w: int = 700
    frame_h: int = 395
    roi_spec: object = None
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    events: EventParams = field(default_factory=EventParams)
    tz_offset_min: int = DEFAULT_TZ_OFFSET_MIN
    grid_scale: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.frame_w <= 0 or self.frame_h <= 0:
            raise InvalidConfig("frame", f"dimensions must be positive, got {self.frame_w}x{self.frame_h}")
        if self.grid_scale < 1:
            raise InvalidConfig("grid_scale", "must be >= 1")

    @property
    def roi(self) -> RoiPolygon:
        try:
            return parse_roi(self.roi_spec, self.frame_w, self.frame_h)
        except ValidationError as exc:
            raise InvalidConfig("roi", str(exc)) from None

    def to_dict(self) -> dict:
        det = self.detector
        return {
            "paths": {f.name: (None if getattr(self.paths, f.name) is None else str(getattr(self.paths, f.name)))
                      for f in fields(Paths)},
            "frame": {"width": self.frame_w, "height": self.frame_h},
            "roi": roi_to_spec(self.roi),
            "detector": {
                "confidence_threshold": det.confidence_threshold,
                "nms_iou_threshold": det.nms_iou_threshold,
                "class_filter": None if det.class_filter is None else sorted(det.class_filter),
                "adapter_cmd": det.adapter_cmd,
            },
            "events": {f.name: getattr(self.events, f.name) for f in fields(EventParams)},
            "tz_offset_min": self.tz_offset_min,
            "grid_scale": self.grid_scale,
            "seed": self.seed,
        }

    def digest(self, extra: dict | None = None) -> str:
        payload = {"config": self.to_dict(), "args": extra or {}}
        return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()[:16]


def _section(data: dict, name: str) -> dict:
    value = data.get(name) or {}
    if not isinstance(value, dict):
        raise InvalidConfig(name, "must be a mapping")
    return value


def from_dict(data: dict, base_dir: Path | None = None) -> AppConfig:
    """Build an ``AppConfig``; relative paths resolve against ``base_dir``."""
    known = {"paths", "frame", "roi", "detector", "events", "tz_offset_min", "grid_scale", "seed"}
    unknown = set(data) - known
    if unknown:
        raise InvalidConfig(sorted(unknown)[0], "unknown config section")

    def path(v):
        if v is None:
            return None
        p = Path(v)
        return p if p.is_absolute() or base_dir is None else base_dir / p

    p = _section(data, "paths")
    paths = Paths(
        frames_dir=path(p.get("frames_dir")),
        labels_dir=path(p.get("labels_dir")),
        detections=path(p.get("detections")),
        out_dir=path(p.get("out_dir")) or Path("gvp-out"),
    )
    frame = _section(data, "frame")
    d = _section(data, "detector")
    try:
        det = DetectorConfig(
            confidence_threshold=float(d.get("confidence_threshold", 0.25)),
            nms_iou_threshold=float(d.get("nms_iou_threshold", 0.45)),
            class_filter=None if d.get("class_filter") is None else frozenset(int(c) for c in d["class_filter"]),
            adapter_cmd=d.get("adapter_cmd"),
            target_w=int(frame.get("width", 700)),
            target_h=int(frame.get("height", 395)),
        )
        ev = EventParams(**_section(data, "events"))
    except (TypeError, ValueError) as exc:
        raise InvalidConfig("detector/events", str(exc)) from None
    cfg = AppConfig(
        paths=paths,
        frame_w=int(frame.get("width", 700)),
        frame_h=int(frame.get("height", 395)),
        roi_spec=data.get("roi"),
        detector=det,
        events=ev,
        tz_offset_min=int(data.get("tz_offset_min", DEFAULT_TZ_OFFSET_MIN)),
        grid_scale=int(data.get("grid_scale", 1)),
        seed=int(data.get("seed", 0)),
    )
    cfg.roi  # validate eagerly
    return cfg


def load_config(path) -> AppConfig:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise InvalidConfig("config", "top level must be a mapping")
    return from_dict(data, base_dir=path.parent)


def dump_config(cfg: AppConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
