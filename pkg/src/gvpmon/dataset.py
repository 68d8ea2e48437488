"""Frame ingestion, YOLO label I/O, train/test splitting and flip augmentation.

Pixel work (resizing, normalization, blurring, the flip itself) belongs to
the detector adapter. This module only carries the directives and the label
arithmetic they imply.
"""

from __future__ import annotations

import json
import math
import os
import random
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import (
    CountExceedsTrain,
    DuplicateFrameId,
    EmptySource,
    OutOfRange,
    ParseError,
    ValidationError,
)
from .geometry import CLASS_NAMES, FrameRecord, GroundTruthBox, NormBox, norm_to_pixel

FRAME_NAME_RE = re.compile(r"^(\d{8})_(\d{6})$")
IMAGE_SUFFIXES = (".jpg", ".png")

TRAIN = "train"
TEST = "test"
UNLABELED = "unlabeled"

FLIP_H = "flip_h"


def parse_frame_id(frame_id: str) -> int:
    """Return the UTC timestamp encoded in a ``YYYYMMDD_HHMMSS`` frame id."""
    m = FRAME_NAME_RE.match(frame_id)
    if not m:
        raise ParseError(f"frame name {frame_id!r} does not match YYYYMMDD_HHMMSS")
    try:
        dt = datetime.strptime(frame_id, "%Y%m%d_%H%M%S").replace(tzinfo=timezone.utc)
    except ValueError as exc:
        raise ParseError(f"frame name {frame_id!r} is not a valid date/time: {exc}") from None
    return int(dt.timestamp())


def format_frame_id(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y%m%d_%H%M%S")


@dataclass(frozen=True)
class FrameFile:
    frame_id: str
    timestamp: int
    path: Path


@dataclass
class FrameSource:
    """A directory of timestamp-named frames extracted from the camera video.

    ``fps`` records the frame rate of the originating video; it is kept for
    provenance only and plays no part in sampling.
    """

    root_path: Path
    fps: float = 30.0

    def __post_init__(self):
        self.root_path = Path(self.root_path)

    def frames(self) -> list[FrameFile]:
        if not self.root_path.is_dir():
            raise EmptySource(f"frame directory {self.root_path} does not exist")
        seen: dict[str, Path] = {}
        out = []
        for entry in os.scandir(self.root_path):
            if not entry.is_file():
                continue
            stem, suffix = os.path.splitext(entry.name)
            if suffix.lower() not in IMAGE_SUFFIXES:
                continue
            ts = parse_frame_id(stem)
            if stem in seen:
                raise DuplicateFrameId(f"frame {stem} appears twice: {seen[stem].name}, {entry.name}")
            seen[stem] = Path(entry.path)
            out.append(FrameFile(stem, ts, Path(entry.path)))
        out.sort(key=lambda f: f.timestamp)
        return out


def sample_timestamps(timestamps: Sequence[int], interval: float) -> list[int]:
    """Indices of the earliest item in each ``interval``-wide bucket.

    Buckets are aligned to the first (smallest) timestamp. ``timestamps`` must
    be sorted ascending.
    """
    if interval <= 0:
        raise ValidationError(f"interval must be positive, got {interval}")
    if not timestamps:
        return []
    t0 = timestamps[0]
    picked = []
    last_bucket = None
    for i, ts in enumerate(timestamps):
        bucket = math.floor((ts - t0) / interval)
        if bucket != last_bucket:
            picked.append(i)
            last_bucket = bucket
    return picked


def sample_frames(src: FrameSource | Sequence[FrameFile], interval: float) -> list[FrameRecord]:
    """Keep one frame per ``interval`` seconds (the earliest in each bucket)."""
    if interval <= 0:
        raise ValidationError(f"interval must be positive, got {interval}")
    frames = src.frames() if isinstance(src, FrameSource) else sorted(src, key=lambda f: f.timestamp)
    if not frames:
        raise EmptySource("no frames to sample")
    idx = sample_timestamps([f.timestamp for f in frames], interval)
    return [FrameRecord(frames[i].frame_id, frames[i].timestamp) for i in idx]


# --- YOLO labels -------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Label:
    """Ground truth as stored on disk: class id plus normalized box."""

    class_id: int
    box: NormBox

    def flipped(self) -> "Label":
        return Label(self.class_id, replace(self.box, cx=1.0 - self.box.cx))


def parse_yolo_line(line: str, lineno: int | None = None, path: str | None = None) -> Label:
    parts = line.split()
    if len(parts) != 5:
        raise ParseError(f"expected 'class cx cy w h', got {line.strip()!r}", lineno, path)
    try:
        cls = int(parts[0])
        cx, cy, w, h = (float(p) for p in parts[1:])
    except ValueError:
        raise ParseError(f"non-numeric field in {line.strip()!r}", lineno, path) from None
    if cls < 0:
        raise ParseError(f"negative class id {cls}", lineno, path)
    try:
        return Label(cls, NormBox(cx, cy, w, h))
    except OutOfRange as exc:
        where = f"{path}:{lineno}: " if path else (f"line {lineno}: " if lineno else "")
        raise OutOfRange(f"{where}{exc}") from None


def read_yolo_labels(path: str | os.PathLike) -> list[Label]:
    labels = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            labels.append(parse_yolo_line(line, lineno, str(path)))
    return labels


def format_yolo_line(label: Label) -> str:
    b = label.box
    return f"{label.class_id} {b.cx:.6f} {b.cy:.6f} {b.w:.6f} {b.h:.6f}"


def write_yolo_labels(path: str | os.PathLike, labels: Iterable[Label]) -> None:
    text = "".join(format_yolo_line(lb) + "\n" for lb in labels)
    Path(path).write_text(text, encoding="utf-8")


@dataclass
class AnnotationSet:
    """Ground-truth labels per frame id."""

    labels: dict[str, list[Label]]
    class_names: tuple[str, ...] = CLASS_NAMES

    def __post_init__(self):
        self.class_names = tuple(self.class_names)
        n = len(self.class_names)
        for fid, lbs in self.labels.items():
            for lb in lbs:
                if not (0 <= lb.class_id < n):
                    raise ValidationError(f"frame {fid}: class id {lb.class_id} not in {list(self.class_names)}")

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, frame_id: str) -> bool:
        return frame_id in self.labels

    def frame_ids(self) -> list[str]:
        return sorted(self.labels)

    def ground_truth(self, frame_id: str, frame_w: float, frame_h: float) -> list[GroundTruthBox]:
        return [GroundTruthBox(norm_to_pixel(lb.box, frame_w, frame_h), lb.class_id) for lb in self.labels[frame_id]]

    def check_against(self, frames: Iterable[str]) -> None:
        known = set(frames)
        missing = [fid for fid in self.labels if fid not in known]
        if missing:
            raise ValidationError(f"{len(missing)} annotated frames not in source, e.g. {sorted(missing)[:5]}")


def load_annotations(labels_dir: str | os.PathLike, class_names: Sequence[str] = CLASS_NAMES) -> AnnotationSet:
    """Read every ``<frame_id>.txt`` in ``labels_dir``."""
    root = Path(labels_dir)
    if not root.is_dir():
        raise EmptySource(f"label directory {root} does not exist")
    labels = {}
    for p in sorted(root.glob("*.txt")):
        if p.name == "classes.txt":
            continue
        labels[p.stem] = read_yolo_labels(p)
    return AnnotationSet(labels, tuple(class_names))


def save_annotations(ann: AnnotationSet, labels_dir: str | os.PathLike) -> None:
    root = Path(labels_dir)
    root.mkdir(parents=True, exist_ok=True)
    for fid in ann.frame_ids():
        write_yolo_labels(root / f"{fid}.txt", ann.labels[fid])


# --- manifest ----------------------------------------------------------------


@dataclass(frozen=True)
class Preprocess:
    target_w: int = 700
    target_h: int = 395
    normalize: str = "unit"

    def __post_init__(self):
        if self.target_w <= 0 or self.target_h <= 0:
            raise ValidationError(f"preprocess dims must be positive, got {self.target_w}x{self.target_h}")


@dataclass(frozen=True)
class ManifestEntry:
    frame_id: str
    split: str
    transforms: tuple[str, ...] = ()
    labels: tuple[Label, ...] = ()

    @property
    def is_augmented(self) -> bool:
        return bool(self.transforms)

    def to_json(self) -> dict:
        return {
            "frame_id": self.frame_id,
            "split": self.split,
            "transforms": list(self.transforms),
            "labels": [[lb.class_id, lb.box.cx, lb.box.cy, lb.box.w, lb.box.h] for lb in self.labels],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "ManifestEntry":
        labels = tuple(Label(int(c), NormBox(cx, cy, w, h)) for c, cx, cy, w, h in obj.get("labels", []))
        return cls(obj["frame_id"], obj["split"], tuple(obj.get("transforms", [])), labels)


@dataclass
class DatasetManifest:
    """Annotated train/test entries, augmented copies and the unlabeled pool.

    Augmented entries carry the ``frame_id`` of the original image plus the
    transform directives the adapter must apply to its pixels.
    """

    entries: list[ManifestEntry]
    preprocess: Preprocess = field(default_factory=Preprocess)
    class_names: tuple[str, ...] = CLASS_NAMES

    def by_split(self, split: str, augmented: bool | None = None) -> list[ManifestEntry]:
        return [
            e
            for e in self.entries
            if e.split == split and (augmented is None or e.is_augmented == augmented)
        ]

    def counts(self) -> dict[str, int]:
        originals = [e for e in self.entries if not e.is_augmented]
        return {
            "train": sum(e.split == TRAIN for e in originals),
            "test": sum(e.split == TEST for e in originals),
            "unlabeled": sum(e.split == UNLABELED for e in originals),
            "augmented": sum(e.is_augmented for e in self.entries),
            "annotated": sum(e.split in (TRAIN, TEST) for e in originals),
            "total": len(self.entries),
        }


def split(
    ann: AnnotationSet,
    train_fraction: float = 0.8,
    seed: int = 0,
    unlabeled: Iterable[str] = (),
    preprocess: Preprocess | None = None,
) -> DatasetManifest:
    """Seeded frame-level train/test split.

    ``|train| = round(train_fraction * N)`` with halves rounded up. Frame ids
    in ``unlabeled`` that carry no annotations are kept as a separate pool.
    """
    if not (0.0 < train_fraction < 1.0):
        raise ValidationError(f"train_fraction must be in (0, 1), got {train_fraction}")
    ids = ann.frame_ids()
    random.Random(seed).shuffle(ids)
    n_train = math.floor(train_fraction * len(ids) + 0.5)
    train_ids = set(ids[:n_train])
    entries = [
        ManifestEntry(fid, TRAIN if fid in train_ids else TEST, (), tuple(ann.labels[fid]))
        for fid in ann.frame_ids()
    ]
    entries += [ManifestEntry(fid, UNLABELED) for fid in sorted(set(unlabeled) - set(ann.labels))]
    return DatasetManifest(entries, preprocess or Preprocess(), ann.class_names)


def augment_flip(manifest: DatasetManifest, count: int, seed: int = 0) -> DatasetManifest:
    """Add ``count`` horizontally flipped copies of distinct train entries."""
    originals = manifest.by_split(TRAIN, augmented=False)
    if count < 0:
        raise ValidationError(f"flip count must be non-negative, got {count}")
    if count > len(originals):
        raise CountExceedsTrain(f"cannot flip {count} images; the train split has {len(originals)}")
    already = {e.frame_id for e in manifest.entries if FLIP_H in e.transforms}
    pool = [e for e in originals if e.frame_id not in already]
    if count > len(pool):
        raise CountExceedsTrain(f"only {len(pool)} train entries are not yet flipped")
    chosen = random.Random(seed).sample(pool, count)
    chosen.sort(key=lambda e: e.frame_id)
    flipped = [
        ManifestEntry(e.frame_id, TRAIN, (FLIP_H,), tuple(lb.flipped() for lb in e.labels)) for e in chosen
    ]
    return DatasetManifest(list(manifest.entries) + flipped, manifest.preprocess, manifest.class_names)


def add_blur(manifest: DatasetManifest, sigma: float) -> DatasetManifest:
    """Tag every augmented entry with a blur directive; labels are unchanged."""
    if sigma <= 0:
        raise ValidationError(f"blur sigma must be positive, got {sigma}")
    directive = f"blur({sigma:g})"
    entries = [replace(e, transforms=e.transforms + (directive,)) if e.is_augmented else e for e in manifest.entries]
    return DatasetManifest(entries, manifest.preprocess, manifest.class_names)


def write_manifest(manifest: DatasetManifest, path: str | os.PathLike) -> None:
    """One JSON entry per line; preprocessing and class names go to ``<path>.meta.json``."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for e in manifest.entries:
            fh.write(json.dumps(e.to_json()) + "\n")
    meta = {
        "preprocess": {
            "target_w": manifest.preprocess.target_w,
            "target_h": manifest.preprocess.target_h,
            "normalize": manifest.preprocess.normalize,
        },
        "class_names": list(manifest.class_names),
        "counts": manifest.counts(),
    }
    Path(str(path) + ".meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def read_manifest(path: str | os.PathLike) -> DatasetManifest:
    path = Path(path)
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                entries.append(ManifestEntry.from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(str(exc), lineno, str(path)) from None
    meta_path = Path(str(path) + ".meta.json")
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        pre = Preprocess(**meta.get("preprocess", {}))
        names = tuple(meta.get("class_names", CLASS_NAMES))
        return DatasetManifest(entries, pre, names)
    return DatasetManifest(entries)
