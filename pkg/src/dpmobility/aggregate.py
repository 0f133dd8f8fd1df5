"""Link-count aggregation of trajectory corpora over temporal windows."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .network import LinkId
from .trajectories import LinkTrajectory, weekday_label

SOURCE_RAW = "raw"


@dataclass(frozen=True)
class Window:
    """Half-open hour range plus a set of weekday labels."""

    hours: tuple[int, int]
    days: frozenset[str]

    def __post_init__(self):
        h0, h1 = self.hours
        if not (0 <= h0 < h1 <= 24):
            raise ValueError(f"invalid hour window: {self.hours}")

    def contains(self, trip: LinkTrajectory) -> bool:
        h0, h1 = self.hours
        return h0 <= trip.hour < h1 and weekday_label(trip.day) in self.days

    def label(self) -> str:
        return f"{self.hours[0]:02d}-{self.hours[1]:02d}/" + ",".join(sorted(self.days))


@dataclass(frozen=True)
class AggregatedMobilityNetwork:
    """Map from link id to visit count for one temporal window."""

    counts: dict[LinkId, int]
    source: str = SOURCE_RAW
    window: Window | None = None

    def __post_init__(self):
        for lid, c in self.counts.items():
            if c < 1:
                raise ValueError(f"count for link {lid!r} must be >= 1, got {c}")

    @property
    def total_visits(self) -> int:
        return sum(self.counts.values())


def compute_link_counts(corpus: Iterable[LinkTrajectory]) -> dict[LinkId, int]:
    """Per-occurrence link tally: every traversal counts, including repeats
    of a link inside a single trip."""
    counts: Counter[LinkId] = Counter()
    for trip in corpus:
        counts.update(trip.links)
    return dict(counts)


def aggregate(
    corpus: Sequence[LinkTrajectory],
    window: Window | None = None,
    source: str = SOURCE_RAW,
) -> AggregatedMobilityNetwork:
    """Aggregate a corpus into link counts, optionally window-filtered."""
    if window is not None:
        corpus = [t for t in corpus if window.contains(t)]
    return AggregatedMobilityNetwork(
        counts=compute_link_counts(corpus), source=source, window=window
    )
