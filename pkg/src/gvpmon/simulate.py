"""Synthetic GVP scenarios with ground truth.

Waste items are boxes. They arrive as a Poisson process whose hourly rate
follows a night-dumping curve scaled by a weekday multiplier, are scattered
by animals in the early morning, consolidated into one heap and then carted
away by the morning cleaning crew. A noise model turns ground truth into
detector output (misses, box jitter, low-confidence clutter).

Because arrivals are Poisson, removals are independent thinning and moved
items are re-placed uniformly, the items present at any frame outside the
pile-to-clear window form a Poisson process with uniform placement. That
gives closed forms for expected item counts and expected coverage, used to
calibrate the dump rate to a night-time coverage target and to predict
precision/recall of the noise model.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml
from scipy.optimize import brentq

from .analytics import CoverageSample
from .dataset import AnnotationSet, Label, format_frame_id
from .detector import DetectionStream
from .errors import InvalidConfig, SigmaTooLarge
from .geometry import (
    WASTE,
    BBox,
    Detection,
    FrameRecord,
    RoiPolygon,
    iou_matrix,
    parse_roi,
    pixel_to_norm,
    roi_to_spec,
    union_area_xyxy,
)

# Items per hour before calibration: quiet after the morning clean, a slow
# start mid-afternoon, heavy dumping late evening peaking before midnight.
DEFAULT_DUMP_RATE = (
    0.6, 0.4, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5,
    0.8, 1.0, 1.2, 1.5, 2.5, 3.0, 3.5, 5.0,
)  # fmt: skip

# Monday first. Busy after the weekend, a holiday dip mid-week.
DEFAULT_WEEKDAY_MULTIPLIERS = (1.3, 1.25, 0.7, 1.05, 1.1, 0.95, 0.85)


@dataclass(frozen=True)
class ScenarioConfig:
    days: int = 60
    frame_interval: int = 300
    frame_w: int = 700
    frame_h: int = 395
    roi: RoiPolygon = field(default_factory=lambda: RoiPolygon.rectangle(50, 100, 600, 280, 700, 395))
    start_date: str = "2024-01-01"
    tz_offset_min: int = 330

    dump_rate: tuple[float, ...] = DEFAULT_DUMP_RATE
    weekday_multipliers: tuple[float, ...] = DEFAULT_WEEKDAY_MULTIPLIERS
    # When set, ``dump_rate`` is rescaled so the expected mean coverage over
    # ``night_peak_hours`` equals this value.
    night_peak_target: float | None = 0.39
    night_peak_hours: tuple[int, ...] = (0, 1, 2)

    item_w: tuple[float, float] = (30.0, 90.0)
    item_h: tuple[float, float] = (20.0, 60.0)

    scatter_window: tuple[float, float] = (3.0, 6.0)
    scatter_remove_p: float = 0.02
    scatter_move_p: float = 0.05
    clean_window: tuple[float, float] = (6.0, 8.0)
    pile_consolidation: float = 0.5

    p_miss: float = 0.16
    clutter_rate: float = 0.0
    # When set, ``clutter_rate`` is solved so expected precision hits this value.
    target_precision: float | None = 0.94
    jitter_sigma: float = 1.5
    true_conf: tuple[float, float] = (0.5, 1.0)
    clutter_conf: tuple[float, float] = (0.26, 0.5)

    seed: int = 0

    def __post_init__(self):
        for name in ("dump_rate", "weekday_multipliers", "night_peak_hours", "item_w", "item_h",
                     "scatter_window", "clean_window", "true_conf", "clutter_conf"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not isinstance(self.roi, RoiPolygon):
            object.__setattr__(self, "roi", parse_roi(self.roi, self.frame_w, self.frame_h))
        validate(self)

    # -- derived ----------------------------------------------------------

    @property
    def frames_per_day(self) -> int:
        return 86400 // self.frame_interval

    @property
    def n_frames(self) -> int:
        return self.days * self.frames_per_day

    @property
    def start_ts(self) -> int:
        """UTC timestamp of local midnight on ``start_date``."""
        d = date.fromisoformat(self.start_date)
        tz = timezone(timedelta(minutes=self.tz_offset_min))
        return int(datetime(d.year, d.month, d.day, tzinfo=tz).timestamp())

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "roi":
                v = roi_to_spec(v)
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(sorted(unknown)[0], "unknown scenario field")
        d = dict(d)
        fw, fh = d.get("frame_w", 700), d.get("frame_h", 395)
        if "roi" in d:
            try:
                d["roi"] = parse_roi(d["roi"], fw, fh)
            except ValueError as exc:
                raise InvalidConfig("roi", str(exc)) from None
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidConfig("scenario", str(exc)) from None


def _check(cond: bool, name: str, msg: str) -> None:
    if not cond:
        raise InvalidConfig(name, msg)


def validate(cfg: ScenarioConfig) -> None:
    _check(isinstance(cfg.days, int) and cfg.days >= 1, "days", "must be a positive integer")
    _check(cfg.frame_interval > 0 and 86400 % cfg.frame_interval == 0, "frame_interval",
           "must be a positive divisor of 86400 seconds")
    _check(cfg.frame_w > 0 and cfg.frame_h > 0, "frame_w", "frame dimensions must be positive")
    _check(cfg.roi.is_rectangle, "roi", "the simulator needs an axis-aligned rectangular ROI")
    _check((cfg.roi.frame_w, cfg.roi.frame_h) == (cfg.frame_w, cfg.frame_h), "roi",
           "ROI frame dimensions must match the scenario frame")
    try:
        date.fromisoformat(cfg.start_date)
    except (TypeError, ValueError):
        raise InvalidConfig("start_date", f"not an ISO date: {cfg.start_date!r}") from None
    _check(len(cfg.dump_rate) == 24, "dump_rate", "needs 24 hourly values")
    _check(all(v >= 0 for v in cfg.dump_rate), "dump_rate", "rates must be >= 0")
    _check(len(cfg.weekday_multipliers) == 7, "weekday_multipliers", "needs 7 values")
    _check(all(v >= 0 for v in cfg.weekday_multipliers), "weekday_multipliers", "multipliers must be >= 0")
    if cfg.night_peak_target is not None:
        _check(0 < cfg.night_peak_target < 1, "night_peak_target", "must be in (0, 1)")
        _check(len(cfg.night_peak_hours) > 0 and all(0 <= h < 24 for h in cfg.night_peak_hours),
               "night_peak_hours", "hours must be in 0..23")
    rx0, ry0, rx1, ry1 = cfg.roi.bounds
    for name, (lo, hi), limit in (("item_w", cfg.item_w, rx1 - rx0), ("item_h", cfg.item_h, ry1 - ry0)):
        _check(len((lo, hi)) == 2 and 0 < lo <= hi, name, "must be a (min, max) range of positive sizes")
        _check(hi <= limit, name, f"largest item ({hi}) does not fit the ROI ({limit})")
    for name in ("scatter_window", "clean_window"):
        lo, hi = getattr(cfg, name)
        _check(0 <= lo < hi <= 24, name, "must be a (start, end) local-hour range within a day")
    for name in ("scatter_remove_p", "scatter_move_p", "p_miss", "pile_consolidation"):
        v = getattr(cfg, name)
        _check(0 <= v <= 1, name, "must be a probability in [0, 1]")
    _check(cfg.clutter_rate >= 0, "clutter_rate", "must be >= 0")
    if cfg.target_precision is not None:
        _check(0 < cfg.target_precision <= 1, "target_precision", "must be in (0, 1]")
    _check(cfg.jitter_sigma >= 0, "jitter_sigma", "must be >= 0")
    for name in ("true_conf", "clutter_conf"):
        lo, hi = getattr(cfg, name)
        _check(0 <= lo <= hi <= 1, name, "must be a (low, high) range inside [0, 1]")


def load_scenario(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise InvalidConfig("scenario", "top level must be a mapping")
    data = data.get("scenario", data)
    return ScenarioConfig.from_dict(data)


def dump_scenario(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump({"scenario": cfg.to_dict()}, sort_keys=False)


# --- schedule and closed-form expectations -----------------------------------


@dataclass(frozen=True)
class Schedule:
    """Per-step simulation plan, steps counted from the first recorded frame.

    Simulation starts one day early (``first_step = -frames_per_day``) so the
    first recorded night already holds the previous evening's waste.
    """

    first_step: int
    rate: np.ndarray          # expected arrivals per step, index = step - first_step
    scatter: np.ndarray       # bool per step
    hour: np.ndarray          # local hour of the interval ending at the step
    pile_steps: tuple[int, ...]
    clear_steps: tuple[int, ...]

    def index(self, step: int) -> int:
        return step - self.first_step


def _rng_streams(seed: int):
    ss = np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(3)]


def build_schedule(cfg: ScenarioConfig, rate_scale: float = 1.0) -> Schedule:
    fpd = cfg.frames_per_day
    dt = cfg.frame_interval
    first = -fpd
    steps = np.arange(first, cfg.n_frames)
    t0 = cfg.start_ts
    offset = cfg.tz_offset_min * 60
    # arrivals and scatter for step k happen during (t_k - dt, t_k]; bin by its start
    local_start = t0 + steps * dt - dt + offset
    hour = (local_start // 3600) % 24
    # 1970-01-01 was a Thursday (weekday 3)
    weekday = ((local_start // 86400) + 3) % 7
    rates = np.asarray(cfg.dump_rate)[hour] * np.asarray(cfg.weekday_multipliers)[weekday]
    rate = rates * rate_scale * dt / 3600.0
    frac_hour = (local_start % 86400) / 3600.0
    lo, hi = cfg.scatter_window
    scatter = (frac_hour >= lo) & (frac_hour < hi)

    sched_rng = _rng_streams(cfg.seed)[0]
    c_lo, c_hi = cfg.clean_window
    mid = (c_lo + c_hi) / 2.0
    piles, clears = [], []
    for day in range(-1, cfg.days):
        day_start = day * 86400  # seconds from t0 (local midnight)
        t_pile = day_start + (c_lo + sched_rng.uniform(0, mid - c_lo)) * 3600.0
        t_clear = day_start + (mid + sched_rng.uniform(0, c_hi - mid)) * 3600.0
        piles.append(math.ceil(t_pile / dt))
        clears.append(math.ceil(t_clear / dt))
    return Schedule(first, rate, scatter, hour, tuple(piles), tuple(clears))


def expected_counts(cfg: ScenarioConfig, schedule: Schedule | None = None) -> np.ndarray:
    """Expected number of items present at each recorded frame."""
    sched = schedule or build_schedule(cfg)
    keep = 1.0 - cfg.scatter_remove_p
    clears = set(sched.clear_steps)
    mu = 0.0
    out = np.zeros(cfg.n_frames)
    for i, step in enumerate(range(sched.first_step, cfg.n_frames)):
        if sched.scatter[i]:
            mu *= keep
        mu += sched.rate[i]
        if step in clears:
            mu = 0.0
        if step >= 0:
            out[step] = mu
    return out


def _axis_cover_prob(lo: float, hi: float, size_range: tuple[float, float], n_quad: int = 48) -> np.ndarray:
    """P(a uniformly placed item covers pixel center u), per pixel along one axis.

    The item's leading edge is uniform on ``[lo, hi - s]`` and its size ``s``
    uniform on ``size_range`` (Gauss-Legendre over ``s``).
    """
    n = int(round(hi - lo))
    u = lo + np.arange(n) + 0.5
    s_lo, s_hi = size_range
    if s_hi == s_lo:
        sizes, weights = np.array([s_lo]), np.array([1.0])
    else:
        xg, wg = np.polynomial.legendre.leggauss(n_quad)
        sizes = s_lo + (xg + 1) * (s_hi - s_lo) / 2
        weights = wg / 2
    p = np.zeros(n)
    for s, wt in zip(sizes, weights):
        span = hi - s - lo
        if span <= 0:
            p += wt * ((u >= lo) & (u < lo + s))
            continue
        overlap = np.clip(np.minimum(u, hi - s) - np.maximum(u - s, lo), 0.0, None)
        p += wt * overlap / span
    return p


class CoverageModel:
    """Expected coverage of a rectangular ROI by ``Poisson(mu)`` uniform items."""

    def __init__(self, cfg: ScenarioConfig):
        x0, y0, x1, y1 = cfg.roi.bounds
        ax = _axis_cover_prob(x0, x1, cfg.item_w)
        ay = _axis_cover_prob(y0, y1, cfg.item_h)
        ux, cx = np.unique(np.round(ax, 12), return_counts=True)
        uy, cy = np.unique(np.round(ay, 12), return_counts=True)
        self._p = np.outer(ux, uy).ravel()
        self._w = np.outer(cx, cy).ravel() / (ax.size * ay.size)

    def expected(self, mu) -> np.ndarray:
        mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
        return 1.0 - np.exp(-np.outer(mu, self._p)) @ self._w


def expected_coverage(cfg: ScenarioConfig, schedule: Schedule | None = None) -> np.ndarray:
    """Expected ground-truth coverage per recorded frame.

    Exact outside each day's pile-to-clear interval, where items sit in a heap.
    """
    mu = expected_counts(cfg, schedule)
    uniq, inv = np.unique(np.round(mu, 12), return_inverse=True)
    return CoverageModel(cfg).expected(uniq)[inv]


def _night_mask(cfg: ScenarioConfig, sched: Schedule) -> np.ndarray:
    # bin by the frame's own local hour, as the analytics profiles do
    ts = cfg.start_ts + np.arange(cfg.n_frames) * cfg.frame_interval + cfg.tz_offset_min * 60
    frame_hours = (ts // 3600) % 24
    return np.isin(frame_hours, cfg.night_peak_hours)


def calibrate_dump_rate(cfg: ScenarioConfig, target: float | None = None) -> float:
    """Scale factor for ``dump_rate`` that puts the expected mean coverage over
    ``night_peak_hours`` at ``target``."""
    target = cfg.night_peak_target if target is None else target
    if target is None:
        return 1.0
    base = build_schedule(cfg)
    mu1 = expected_counts(cfg, base)
    night = _night_mask(cfg, base)
    mu_night = mu1[night]
    if not np.any(mu_night > 0):
        raise InvalidConfig("dump_rate", "no arrivals reach the night-peak hours; cannot calibrate")
    uniq, cnt = np.unique(np.round(mu_night, 12), return_counts=True)
    model = CoverageModel(cfg)
    weights = cnt / cnt.sum()

    def gap(scale):
        return float(model.expected(uniq * scale) @ weights) - target

    hi = 1.0
    while gap(hi) < 0:
        hi *= 2.0
        if hi > 1e6:
            raise InvalidConfig("night_peak_target", f"coverage {target} is not reachable")
    return brentq(gap, 0.0, hi, xtol=1e-12, rtol=1e-12)


def expected_gt_total(cfg: ScenarioConfig) -> float:
    return float(expected_counts(cfg).sum())


def clutter_rate_for(cfg: ScenarioConfig, precision: float) -> float:
    """Per-frame clutter rate giving ``precision`` in expectation."""
    e_tp = (1.0 - cfg.p_miss) * expected_gt_total(cfg)
    return e_tp * (1.0 / precision - 1.0) / cfg.n_frames


def resolve(cfg: ScenarioConfig) -> ScenarioConfig:
    """Apply the calibration targets, returning a config with none left open."""
    out = cfg
    if out.night_peak_target is not None:
        scale = calibrate_dump_rate(out)
        out = replace(out, dump_rate=tuple(r * scale for r in out.dump_rate), night_peak_target=None)
    if out.target_precision is not None:
        out = replace(out, clutter_rate=clutter_rate_for(out, out.target_precision), target_precision=None)
    return out


def expected_metrics(cfg: ScenarioConfig) -> tuple[float, float]:
    """(precision, recall) the noise model produces in expectation.

    Needs ``jitter_sigma <= min(item size) / 10`` so a jittered box is always
    matchable to its source.
    """
    min_side = min(cfg.item_w[0], cfg.item_h[0])
    if cfg.jitter_sigma > min_side / 10.0:
        raise SigmaTooLarge(f"jitter_sigma {cfg.jitter_sigma} exceeds min item side / 10 = {min_side / 10}")
    cfg = resolve(cfg)
    e_gt = expected_gt_total(cfg)
    e_tp = (1.0 - cfg.p_miss) * e_gt
    e_fp = cfg.clutter_rate * cfg.n_frames
    recall = 1.0 - cfg.p_miss if e_gt > 0 else 1.0
    precision = e_tp / (e_tp + e_fp) if e_tp + e_fp > 0 else 1.0
    return precision, recall


# --- generation ---------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioEvent:
    kind: str
    ts: int


@dataclass
class ScenarioOutput:
    config: ScenarioConfig
    annotations: AnnotationSet
    detections: DetectionStream
    coverage: list[CoverageSample]
    events: list[ScenarioEvent]
    # raw per-frame boxes (xyxy arrays) for fast downstream checks
    gt_boxes: list[np.ndarray] = field(repr=False, default_factory=list)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScenarioOutput):
            return NotImplemented
        return (
            self.config == other.config
            and self.annotations.labels == other.annotations.labels
            and self.detections == other.detections
            and self.coverage == other.coverage
            and self.events == other.events
        )


def _place(rng, n: int, roi_bounds, item_w, item_h) -> np.ndarray:
    x0, y0, x1, y1 = roi_bounds
    w = rng.uniform(item_w[0], item_w[1], n)
    h = rng.uniform(item_h[0], item_h[1], n)
    x = x0 + rng.random(n) * (x1 - x0 - w)
    y = y0 + rng.random(n) * (y1 - y0 - h)
    return np.column_stack([x, y, x + w, y + h])


def _pile(rng, items: np.ndarray, roi_bounds, consolidation: float) -> np.ndarray:
    """Relocate items into one heap whose union area does not exceed the current one.

    Items go to uniform spots inside a pile rectangle of ``consolidation``
    times the current union area. If overhanging items would make the heap
    larger than before, all items are stacked on a common corner instead,
    which minimizes union area for any set of box sizes.
    """
    if items.shape[0] == 0:
        return items
    x0, y0, x1, y1 = roi_bounds
    before = union_area_xyxy(items)
    w = items[:, 2] - items[:, 0]
    h = items[:, 3] - items[:, 1]
    rw, rh = x1 - x0, y1 - y0
    area = max(consolidation * before, 1e-9)
    pw = min(rw, math.sqrt(area * rw / rh))
    ph = min(rh, area / pw)
    px = x0 + rng.random() * (rw - pw)
    py = y0 + rng.random() * (rh - ph)
    nx = px + rng.random(w.size) * np.maximum(pw - w, 0.0)
    ny = py + rng.random(h.size) * np.maximum(ph - h, 0.0)
    nx = np.minimum(nx, x1 - w)
    ny = np.minimum(ny, y1 - h)
    heap = np.column_stack([nx, ny, nx + w, ny + h])
    if union_area_xyxy(heap) <= before:
        return heap
    ax = min(px, x1 - w.max())
    ay = min(py, y1 - h.max())
    return np.column_stack([np.full_like(w, ax), np.full_like(h, ay), ax + w, ay + h])


def _jitter(rng, boxes: np.ndarray, sigma: float, frame_w: float, frame_h: float) -> np.ndarray:
    """Gaussian noise on every edge, clipped to the frame, resampled until the
    jittered box keeps IoU >= 0.5 with its source."""
    if sigma == 0 or boxes.shape[0] == 0:
        return boxes.copy()
    out = np.empty_like(boxes)
    todo = np.arange(boxes.shape[0])
    for _ in range(100):
        src = boxes[todo]
        cand = src + rng.normal(0.0, sigma, src.shape)
        cand[:, [0, 2]] = np.clip(cand[:, [0, 2]], 0, frame_w)
        cand[:, [1, 3]] = np.clip(cand[:, [1, 3]], 0, frame_h)
        lo_x = np.minimum(cand[:, 0], cand[:, 2])
        hi_x = np.maximum(cand[:, 0], cand[:, 2])
        lo_y = np.minimum(cand[:, 1], cand[:, 3])
        hi_y = np.maximum(cand[:, 1], cand[:, 3])
        cand = np.column_stack([lo_x, lo_y, hi_x, hi_y])
        ok = np.diagonal(iou_matrix(cand, src)) >= 0.5 if todo.size else np.array([], bool)
        out[todo[ok]] = cand[ok]
        todo = todo[~ok]
        if todo.size == 0:
            return out
    out[todo] = boxes[todo]
    return out


def _detections(arr: np.ndarray, conf: np.ndarray) -> tuple[Detection, ...]:
    return tuple(
        Detection(BBox(float(b[0]), float(b[1]), float(b[2] - b[0]), float(b[3] - b[1])), float(c), WASTE)
        for b, c in zip(arr, conf)
    )


def generate(cfg: ScenarioConfig) -> ScenarioOutput:
    """Run the scenario. Deterministic for a given config (including seed)."""
    validate(cfg)
    cfg = resolve(cfg)
    sched = build_schedule(cfg)
    _, world, noise = _rng_streams(cfg.seed)
    bounds = cfg.roi.bounds
    roi_area = cfg.roi.area
    piles = set(sched.pile_steps)
    clears = set(sched.clear_steps)
    dt = cfg.frame_interval
    t0 = cfg.start_ts

    items = np.zeros((0, 4))
    labels: dict[str, list[Label]] = {}
    records: list[FrameRecord] = []
    coverage: list[CoverageSample] = []
    events: list[ScenarioEvent] = []
    gt_boxes: list[np.ndarray] = []

    for i, step in enumerate(range(sched.first_step, cfg.n_frames)):
        if sched.scatter[i] and items.shape[0]:
            items = items[world.random(items.shape[0]) >= cfg.scatter_remove_p]
            moved = world.random(items.shape[0]) < cfg.scatter_move_p
            if moved.any():
                w = items[moved, 2] - items[moved, 0]
                h = items[moved, 3] - items[moved, 1]
                x = bounds[0] + world.random(w.size) * (bounds[2] - bounds[0] - w)
                y = bounds[1] + world.random(h.size) * (bounds[3] - bounds[1] - h)
                items[moved] = np.column_stack([x, y, x + w, y + h])
        n_new = world.poisson(sched.rate[i])
        if n_new:
            items = np.vstack([items, _place(world, n_new, bounds, cfg.item_w, cfg.item_h)])
        ts = t0 + step * dt
        if step in piles:
            items = _pile(world, items, bounds, cfg.pile_consolidation)
            if step >= 0:
                events.append(ScenarioEvent("pile", ts))
        if step in clears:
            items = np.zeros((0, 4))
            if step >= 0:
                events.append(ScenarioEvent("clear", ts))
        if step < 0:
            continue

        fid = format_frame_id(ts)
        n = items.shape[0]
        gt_boxes.append(items.copy())
        labels[fid] = [
            Label(WASTE, pixel_to_norm(BBox(b[0], b[1], b[2] - b[0], b[3] - b[1]), cfg.frame_w, cfg.frame_h))
            for b in items.tolist()
        ]
        cov = min(1.0, union_area_xyxy(items) / roi_area)
        coverage.append(CoverageSample(int(ts), cov, n))

        seen = items[noise.random(n) >= cfg.p_miss]
        seen = _jitter(noise, seen, cfg.jitter_sigma, cfg.frame_w, cfg.frame_h)
        conf = noise.uniform(cfg.true_conf[0], cfg.true_conf[1], seen.shape[0])
        n_fp = noise.poisson(cfg.clutter_rate)
        clutter = _place(noise, n_fp, bounds, cfg.item_w, cfg.item_h)
        clutter_conf = noise.uniform(cfg.clutter_conf[0], cfg.clutter_conf[1], n_fp)
        records.append(FrameRecord(fid, int(ts), _detections(seen, conf) + _detections(clutter, clutter_conf)))

    return ScenarioOutput(
        cfg,
        AnnotationSet(labels),
        DetectionStream(records),
        coverage,
        events,
        gt_boxes,
    )


def write_placeholder_frames(root, cfg: ScenarioConfig, step: int | None = None, suffix: str = ".jpg") -> int:
    """Create empty timestamp-named image files spanning the scenario.

    Stand-ins for frames extracted from video; ``step`` defaults to the
    scenario's frame interval.
    """
    step = step or cfg.frame_interval
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    n = cfg.days * 86400 // step
    for k in range(n):
        (root / f"{format_frame_id(cfg.start_ts + k * step)}{suffix}").touch()
    return n
