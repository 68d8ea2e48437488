"""Coverage time series, hourly/daily/weekday profiles and event detection."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from datetime import date, datetime, timedelta, timezone
from typing import Iterable, Sequence

from .detector import DetectionStream, DetectorConfig, waste_detections
from .errors import EmptySeries, ValidationError
from .geometry import RoiPolygon, coverage_fraction

DEFAULT_TZ_OFFSET_MIN = 330  # +05:30

WEEKDAY_NAMES = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")


@dataclass(frozen=True, slots=True)
class CoverageSample:
    timestamp: int
    coverage: float
    waste_count: int

    def __post_init__(self):
        if not (0.0 <= self.coverage <= 1.0):
            raise ValidationError(f"coverage {self.coverage} outside [0, 1]")
        if self.waste_count < 0:
            raise ValidationError(f"negative waste count {self.waste_count}")


def coverage_series(
    stream: DetectionStream,
    roi: RoiPolygon,
    cfg: DetectorConfig | None = None,
    grid_scale: int = 1,
) -> list[CoverageSample]:
    cfg = cfg or DetectorConfig()
    out = []
    for rec in stream:
        dets = waste_detections(rec, cfg)
        cov = coverage_fraction([d.box for d in dets], roi, grid_scale)
        out.append(CoverageSample(rec.timestamp, cov, len(dets)))
    return out


def local_time(ts: int, tz_offset_min: int = DEFAULT_TZ_OFFSET_MIN) -> datetime:
    tz = timezone(timedelta(minutes=tz_offset_min))
    return datetime.fromtimestamp(ts, tz=tz)


def write_coverage_csv(series: Iterable[CoverageSample], fh, tz_offset_min: int = DEFAULT_TZ_OFFSET_MIN) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["ts", "iso_time", "coverage", "count"])
    for s in series:
        w.writerow([s.timestamp, local_time(s.timestamp, tz_offset_min).isoformat(), f"{s.coverage:.6f}", s.waste_count])


def read_coverage_csv(fh) -> list[CoverageSample]:
    return [CoverageSample(int(r["ts"]), float(r["coverage"]), int(r["count"])) for r in csv.DictReader(fh)]


# --- profiles ----------------------------------------------------------------


@dataclass(frozen=True)
class ProfileBin:
    key: str
    count: int
    mean: float | None
    min: float | None
    max: float | None

    @property
    def empty(self) -> bool:
        return self.count == 0


@dataclass(frozen=True)
class Profile:
    kind: str
    bins: tuple[ProfileBin, ...]
    tz_offset_min: int

    def means(self) -> list[float | None]:
        return [b.mean for b in self.bins]

    def __getitem__(self, i) -> ProfileBin:
        return self.bins[i]

    def __len__(self) -> int:
        return len(self.bins)

    def argmax(self) -> int:
        """Index of the populated bin with the highest mean (first on ties)."""
        best = None
        for i, b in enumerate(self.bins):
            if b.mean is not None and (best is None or b.mean > self.bins[best].mean):
                best = i
        if best is None:
            raise EmptySeries("profile has no populated bins")
        return best

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "tz_offset_min": self.tz_offset_min,
            "bins": [dict(asdict(b), empty=b.empty) for b in self.bins],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "count", "mean", "min", "max", "empty"])
        fmt = lambda v: "" if v is None else f"{v:.6f}"  # noqa: E731
        for b in self.bins:
            w.writerow([b.key, b.count, fmt(b.mean), fmt(b.min), fmt(b.max), int(b.empty)])
        return buf.getvalue()


def _bin(key: str, values: list[float]) -> ProfileBin:
    if not values:
        return ProfileBin(key, 0, None, None, None)
    return ProfileBin(key, len(values), sum(values) / len(values), min(values), max(values))


def _grouped(series: Sequence[CoverageSample], keyfn, tz_offset_min: int) -> dict:
    if not series:
        raise EmptySeries("cannot profile an empty series")
    groups: dict = {}
    for s in sorted(series, key=lambda s: s.timestamp):
        groups.setdefault(keyfn(local_time(s.timestamp, tz_offset_min)), []).append(s.coverage)
    return groups


def hourly_profile(series: Sequence[CoverageSample], tz_offset_min: int = DEFAULT_TZ_OFFSET_MIN) -> Profile:
    """Mean coverage for each local hour of day (24 bins)."""
    g = _grouped(series, lambda dt: dt.hour, tz_offset_min)
    return Profile("hourly", tuple(_bin(f"{h:02d}", g.get(h, [])) for h in range(24)), tz_offset_min)


def weekday_profile(series: Sequence[CoverageSample], tz_offset_min: int = DEFAULT_TZ_OFFSET_MIN) -> Profile:
    """Mean coverage per local weekday, Monday first (7 bins)."""
    g = _grouped(series, lambda dt: dt.weekday(), tz_offset_min)
    return Profile("weekday", tuple(_bin(WEEKDAY_NAMES[d], g.get(d, [])) for d in range(7)), tz_offset_min)


def daily_profile(series: Sequence[CoverageSample], tz_offset_min: int = DEFAULT_TZ_OFFSET_MIN) -> Profile:
    """Mean coverage per local calendar date, every date in the span included."""
    g = _grouped(series, lambda dt: dt.date(), tz_offset_min)
    first, last = min(g), max(g)
    bins = []
    d: date = first
    while d <= last:
        bins.append(_bin(d.isoformat(), g.get(d, [])))
        d += timedelta(days=1)
    return Profile("daily", tuple(bins), tz_offset_min)


PROFILE_KINDS = {"hourly": hourly_profile, "daily": daily_profile, "weekday": weekday_profile}


def profile(series: Sequence[CoverageSample], kind: str, tz_offset_min: int = DEFAULT_TZ_OFFSET_MIN) -> Profile:
    try:
        fn = PROFILE_KINDS[kind]
    except KeyError:
        raise ValidationError(f"unknown profile kind {kind!r}; expected one of {sorted(PROFILE_KINDS)}") from None
    return fn(series, tz_offset_min)


# --- events ------------------------------------------------------------------

DUMP = "dump"
PILE = "pile"
CLEAR = "clear"


@dataclass(frozen=True)
class EventParams:
    """Thresholds for ``detect_events``.

    ``rise_abs`` is also the minimum absolute fall for a pile or clear, so a
    near-empty site flickering around ``clean_level`` does not fire.
    """

    drop_rel: float = 0.5
    rise_abs: float = 0.05
    clean_level: float = 0.05
    window: int = 1800

    def __post_init__(self):
        for name in ("drop_rel", "rise_abs", "clean_level"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValidationError(f"{name} must be in [0, 1], got {v}")
        if self.window <= 0:
            raise ValidationError(f"window must be positive, got {self.window}")


@dataclass(frozen=True)
class GvpEvent:
    kind: str
    start_ts: int
    end_ts: int
    coverage_before: float
    coverage_after: float

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "start_ts": self.start_ts,
            "end_ts": self.end_ts,
            "before": round(self.coverage_before, 6),
            "after": round(self.coverage_after, 6),
        }


def _merge(triggers: list[GvpEvent], rising: bool) -> list[GvpEvent]:
    merged: list[GvpEvent] = []
    for ev in sorted(triggers, key=lambda e: (e.start_ts, e.end_ts)):
        if merged and ev.start_ts <= merged[-1].end_ts:
            last = merged[-1]
            pick_before = min if rising else max
            pick_after = max if rising else min
            merged[-1] = GvpEvent(
                last.kind,
                last.start_ts,
                max(last.end_ts, ev.end_ts),
                pick_before(last.coverage_before, ev.coverage_before),
                pick_after(last.coverage_after, ev.coverage_after),
            )
        else:
            merged.append(ev)
    return merged


def detect_events(series: Sequence[CoverageSample], params: EventParams | None = None) -> list[GvpEvent]:
    """Find dumping, piling and clearing in a coverage series.

    For each sample that moved since its predecessor, the samples within
    ``window`` seconds before it are compared against it:

    * a rise of at least ``rise_abs`` over the window minimum is a dump;
    * a fall of at least ``drop_rel`` (relative) and ``rise_abs`` (absolute)
      from the window maximum is a clear when it ends at or below
      ``clean_level`` and a pile otherwise.

    Overlapping triggers of one kind are merged into a single event.
    """
    p = params or EventParams()
    s = sorted(series, key=lambda x: x.timestamp)
    raw: dict[str, list[GvpEvent]] = {DUMP: [], PILE: [], CLEAR: []}
    lo = 0
    for j in range(1, len(s)):
        tj, cj = s[j].timestamp, s[j].coverage
        while s[lo].timestamp < tj - p.window:
            lo += 1
        if lo >= j:
            continue
        prev = s[j - 1].coverage
        window = s[lo:j]
        if cj > prev:
            i_min = min(range(len(window)), key=lambda k: (window[k].coverage, k))
            base = window[i_min]
            if cj - base.coverage >= p.rise_abs:
                raw[DUMP].append(GvpEvent(DUMP, base.timestamp, tj, base.coverage, cj))
        elif cj < prev:
            i_max = min(range(len(window)), key=lambda k: (-window[k].coverage, k))
            peak = window[i_max]
            fall = peak.coverage - cj
            if fall >= p.rise_abs and peak.coverage > 0 and fall / peak.coverage >= p.drop_rel:
                kind = CLEAR if cj <= p.clean_level else PILE
                raw[kind].append(GvpEvent(kind, peak.timestamp, tj, peak.coverage, cj))
    events = _merge(raw[DUMP], rising=True) + _merge(raw[PILE], False) + _merge(raw[CLEAR], False)
    events.sort(key=lambda e: (e.start_ts, e.end_ts, e.kind))
    return events


def write_events(events: Iterable[GvpEvent], fh) -> None:
    for ev in events:
        fh.write(json.dumps(ev.to_json()) + "\n")
