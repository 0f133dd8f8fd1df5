"""GPS sample streams, trip segmentation, and link trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from typing import Iterable, Sequence

from .geometry import GeoPoint, validate_geopoint
from .network import LinkId, RoadNetwork

DEFAULT_TRIP_GAP_S = 300.0
# Dataset region default; day-of-week boundaries follow this offset.
DEFAULT_UTC_OFFSET_H = -8.0

WEEKDAY_LABELS = ("M", "T", "W", "Th", "F", "Sa", "Su")


@dataclass(frozen=True)
class GpsSample:
    """One positioning fix from one device."""

    device: str
    t: float  # UTC epoch seconds
    point: GeoPoint
    speed_mps: float | None = None
    heading_deg: float | None = None

    def __post_init__(self):
        if not math.isfinite(self.t):
            raise ValueError(f"non-finite timestamp: {self.t}")
        validate_geopoint(self.point)


@dataclass(frozen=True)
class GpsTrajectory:
    """Time-ordered samples of a single trip; first sample is the origin,
    last sample is the destination."""

    device: str
    samples: tuple[GpsSample, ...]

    def __post_init__(self):
        if len(self.samples) < 2:
            raise ValueError("a trip needs at least 2 samples")
        for a, b in zip(self.samples, self.samples[1:]):
            if not (b.t > a.t):
                raise ValueError("timestamps must be strictly increasing")
        for s in self.samples:
            if s.device != self.device:
                raise ValueError("mixed devices within one trip")

    @property
    def origin(self) -> GeoPoint:
        return self.samples[0].point

    @property
    def destination(self) -> GeoPoint:
        return self.samples[-1].point


@dataclass(frozen=True)
class LinkTrajectory:
    """Ordered, connected link sequence for one trip.

    ``day`` and ``hour`` are the local calendar date and hour-of-day bin of
    the trip origin.  ``speeds`` optionally carries an observed speed per
    link (same length as ``links``) for travel-time metrics.
    """

    device: str
    day: date
    hour: int
    links: tuple[LinkId, ...]
    speeds: tuple[float, ...] | None = None

    def __post_init__(self):
        if len(self.links) < 1:
            raise ValueError("a link trajectory needs at least 1 link")
        if not (0 <= self.hour <= 23):
            raise ValueError(f"hour bin out of range: {self.hour}")
        if self.speeds is not None and len(self.speeds) != len(self.links):
            raise ValueError("speeds must align with links")

    def is_connected(self, net: RoadNetwork) -> bool:
        return all(
            net.links[a].to_node == net.links[b].from_node
            for a, b in zip(self.links, self.links[1:])
        )


def split_trips(
    stream: Iterable[GpsSample], gap_s: float = DEFAULT_TRIP_GAP_S
) -> list[GpsTrajectory]:
    """Cut one device's time-ordered sample stream into trips.

    A new trip starts whenever the inter-sample gap exceeds ``gap_s``.
    Trips with fewer than 2 samples are dropped; samples repeating the
    previous timestamp are discarded.
    """
    trips: list[GpsTrajectory] = []
    run: list[GpsSample] = []
    for s in stream:
        if run:
            if s.t < run[-1].t:
                raise ValueError("sample stream is not time-ordered")
            if s.t == run[-1].t:
                continue
            if s.t - run[-1].t > gap_s:
                if len(run) >= 2:
                    trips.append(GpsTrajectory(run[0].device, tuple(run)))
                run = []
        run.append(s)
    if len(run) >= 2:
        trips.append(GpsTrajectory(run[0].device, tuple(run)))
    return trips


def local_day_hour(t: float, utc_offset_hours: float = DEFAULT_UTC_OFFSET_H) -> tuple[date, int]:
    """Calendar date and hour-of-day of epoch second ``t`` at a fixed offset."""
    tz = timezone(timedelta(hours=utc_offset_hours))
    dt = datetime.fromtimestamp(t, tz)
    return dt.date(), dt.hour


def weekday_label(d: date) -> str:
    return WEEKDAY_LABELS[d.weekday()]


def window_filter(
    corpus: Sequence[GpsTrajectory],
    hour_window: tuple[int, int],
    days: frozenset[str] | set[str],
    utc_offset_hours: float = DEFAULT_UTC_OFFSET_H,
) -> list[GpsTrajectory]:
    """Keep trips whose origin timestamp falls in ``[h_start, h_end)`` on a
    selected weekday.  Idempotent."""
    h0, h1 = hour_window
    if not (0 <= h0 < h1 <= 24):
        raise ValueError(f"invalid hour window: {hour_window}")
    bad = set(days) - set(WEEKDAY_LABELS)
    if bad:
        raise ValueError(f"unknown weekday labels: {sorted(bad)}")
    out = []
    for g in corpus:
        day, hour = local_day_hour(g.samples[0].t, utc_offset_hours)
        if h0 <= hour < h1 and weekday_label(day) in days:
            out.append(g)
    return out
