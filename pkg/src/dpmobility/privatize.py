"""Origin/destination privatization of a trajectory corpus.

A trip endpoint is perturbed when its link is traversed exactly once in the
window's raw aggregation, or when the trip repeats a (device, origin link,
destination link) combination inside the window.  Perturbation draws planar
Laplace noise with a density-adaptive radius, snaps the noisy point onto a
same-class candidate link near the original endpoint, and re-routes only
the affected trip end.  Counts are frozen before any perturbation, and each
draw is seeded from the endpoint's link id, so results are independent of
processing order and identical across runs.

Adding or removing a single link traversal changes the aggregated output by
one count, so noise is calibrated for unit sensitivity.

Three removal-style reference anonymizers operate on the same frozen
counts: dropping whole trips with unique endpoints, clipping unique
endpoint links, and clipping runs of unique links inward from both ends.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

from .adaptive import (
    DEFAULT_BUFFER_STEP_M,
    DEFAULT_H1,
    DEFAULT_H2,
    DEFAULT_INITIAL_BUFFER_M,
    DEFAULT_MAX_BUFFER_M,
    select_radius,
)
from .aggregate import AggregatedMobilityNetwork, Window, aggregate, compute_link_counts
from .errors import DisplacementRangeError, SparseNetworkError, UnmatchableError
from .matching import MatchConfig, match_noisy_endpoint, match_trajectory, rebuild_trajectory
from .network import LinkId, RoadNetwork
from .noise import NoiseParams, SeedRule, perturb
from .trajectories import DEFAULT_TRIP_GAP_S, DEFAULT_UTC_OFFSET_H, GpsTrajectory, LinkTrajectory

ORIGIN = "origin"
DESTINATION = "destination"

SOURCE_DP_ANI = "dp-ani"
SOURCE_TRIP_REMOVE = "trip-remove"
SOURCE_OD_REMOVE = "od-remove"
SOURCE_OD_SUCCESSIVE = "od-successive"


@dataclass(frozen=True)
class PrivacyConfig:
    """All knobs of one privatization run."""

    epsilon: float
    h1: int = DEFAULT_H1
    h2: int = DEFAULT_H2
    initial_buffer_m: float = DEFAULT_INITIAL_BUFFER_M
    buffer_step_m: float = DEFAULT_BUFFER_STEP_M
    max_buffer_m: float = DEFAULT_MAX_BUFFER_M
    global_seed: int = 0
    trip_gap_s: float = DEFAULT_TRIP_GAP_S
    perturb_repeated: bool = True

    def __post_init__(self):
        if not (self.epsilon > 0.0):
            raise ValueError(f"epsilon must be positive: {self.epsilon}")


@dataclass(frozen=True)
class EndpointDecision:
    """Outcome for one endpoint of one surviving trip.

    ``matched_link`` is the candidate the noisy point snapped to (same
    functional class as the original link); ``new_link`` is the endpoint
    link of the rebuilt trip, which is what the released aggregation
    actually contains.  Both equal ``original_link`` for unperturbed ends.
    """

    trip: int
    end: str  # ORIGIN or DESTINATION
    original_link: LinkId
    perturbed: bool
    matched_link: LinkId | None
    new_link: LinkId
    radius_m: float | None


@dataclass
class PrivatizationReport:
    trips_in: int
    trips_out: int
    excluded: dict[str, int] = field(default_factory=dict)
    endpoints_perturbed: int = 0
    endpoints_unchanged_single_count: int = 0
    decisions: list[EndpointDecision] = field(default_factory=list)

    @property
    def trips_excluded(self) -> int:
        return sum(self.excluded.values())


def detect_repeated_od(corpus: Sequence[LinkTrajectory | None]) -> set[int]:
    """Indices of trips repeating a (device, origin link, destination link)
    combination anywhere in the corpus.  ``None`` entries are skipped."""
    groups: dict[tuple[str, LinkId, LinkId], list[int]] = {}
    for i, trip in enumerate(corpus):
        if trip is None:
            continue
        groups.setdefault((trip.device, trip.links[0], trip.links[-1]), []).append(i)
    flagged: set[int] = set()
    for members in groups.values():
        if len(members) > 1:
            flagged.update(members)
    return flagged


def match_corpus(
    gps_corpus: Sequence[GpsTrajectory],
    net: RoadNetwork,
    match_cfg: MatchConfig = MatchConfig(),
    utc_offset_hours: float = DEFAULT_UTC_OFFSET_H,
    threads: int | None = None,
) -> tuple[list[LinkTrajectory | None], int]:
    """Match every trip, keeping input positions; unmatchable become None.

    Returns (aligned list, number of unmatchable trips).  With ``threads``
    > 1 the trips are matched by a thread pool; results are merged in input
    order, so the outcome does not depend on scheduling.
    """

    def one(g: GpsTrajectory) -> LinkTrajectory | None:
        try:
            return match_trajectory(g, net, match_cfg, utc_offset_hours)
        except UnmatchableError:
            return None

    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            matched = list(pool.map(one, gps_corpus))
    else:
        matched = [one(g) for g in gps_corpus]
    return matched, sum(1 for m in matched if m is None)


def privatize_trajectories(
    gps_corpus: Sequence[GpsTrajectory],
    net: RoadNetwork,
    cfg: PrivacyConfig,
    match_cfg: MatchConfig = MatchConfig(),
    utc_offset_hours: float = DEFAULT_UTC_OFFSET_H,
    matched: Sequence[LinkTrajectory | None] | None = None,
    threads: int | None = None,
) -> tuple[dict[int, LinkTrajectory], PrivatizationReport]:
    """Run the full perturbation pipeline over a corpus.

    Returns the surviving privatized trips keyed by their position in
    ``gps_corpus`` plus the decision report.  ``matched`` may carry
    pre-matched link trajectories aligned with ``gps_corpus`` to avoid
    re-matching in parameter sweeps.
    """
    if matched is None:
        matched, _ = match_corpus(gps_corpus, net, match_cfg, utc_offset_hours, threads)
    elif len(matched) != len(gps_corpus):
        raise ValueError("matched corpus must align with the GPS corpus")

    excluded: dict[str, int] = {}

    def exclude(cause: str) -> None:
        excluded[cause] = excluded.get(cause, 0) + 1

    for trip in matched:
        if trip is None:
            exclude("unmatchable")

    counts = compute_link_counts(t for t in matched if t is not None)
    repeated = detect_repeated_od(matched) if cfg.perturb_repeated else set()
    seeds = SeedRule(cfg.global_seed)

    out: dict[int, LinkTrajectory] = {}
    decisions: list[EndpointDecision] = []
    endpoints_perturbed = 0

    for i, (g, trip) in enumerate(zip(gps_corpus, matched)):
        if trip is None:
            continue
        o_link, d_link = trip.links[0], trip.links[-1]
        fire_origin = counts[o_link] == 1 or i in repeated
        fire_destination = counts[d_link] == 1 or i in repeated
        try:
            new_o_node = new_d_node = None
            o_matched = d_matched = None
            o_radius = d_radius = None
            if fire_origin:
                buf = select_radius(
                    net,
                    g.origin,
                    net.links[o_link].functional_class,
                    cfg.h1,
                    cfg.h2,
                    cfg.initial_buffer_m,
                    cfg.buffer_step_m,
                    cfg.max_buffer_m,
                )
                z = perturb(
                    g.origin,
                    NoiseParams(cfg.epsilon, buf.radius_m),
                    seeds.generator(o_link, ORIGIN),
                )
                o_matched, new_o_node = match_noisy_endpoint(z, buf.buffer_set_fc, net)
                o_radius = buf.radius_m
            if fire_destination:
                buf = select_radius(
                    net,
                    g.destination,
                    net.links[d_link].functional_class,
                    cfg.h1,
                    cfg.h2,
                    cfg.initial_buffer_m,
                    cfg.buffer_step_m,
                    cfg.max_buffer_m,
                )
                z = perturb(
                    g.destination,
                    NoiseParams(cfg.epsilon, buf.radius_m),
                    seeds.generator(d_link, DESTINATION),
                )
                d_matched, new_d_node = match_noisy_endpoint(z, buf.buffer_set_fc, net)
                d_radius = buf.radius_m
            rebuilt = rebuild_trajectory(trip, net, new_o_node, new_d_node)
        except SparseNetworkError:
            exclude("sparse_network")
            continue
        except UnmatchableError:
            exclude("unmatchable_rebuild")
            continue
        except DisplacementRangeError:
            exclude("noise_out_of_range")
            continue

        out[i] = rebuilt
        endpoints_perturbed += int(fire_origin) + int(fire_destination)
        decisions.append(
            EndpointDecision(i, ORIGIN, o_link, fire_origin, o_matched, rebuilt.links[0], o_radius)
        )
        decisions.append(
            EndpointDecision(
                i, DESTINATION, d_link, fire_destination, d_matched, rebuilt.links[-1], d_radius
            )
        )

    new_counts = compute_link_counts(out.values())
    unchanged = sum(
        1
        for dec in decisions
        if dec.perturbed
        and counts.get(dec.original_link) == 1
        and dec.new_link == dec.original_link
        and new_counts.get(dec.original_link) == 1
    )

    report = PrivatizationReport(
        trips_in=len(gps_corpus),
        trips_out=len(out),
        excluded=excluded,
        endpoints_perturbed=endpoints_perturbed,
        endpoints_unchanged_single_count=unchanged,
        decisions=decisions,
    )
    return out, report


def privatize_aggregate(
    gps_corpus: Sequence[GpsTrajectory],
    net: RoadNetwork,
    cfg: PrivacyConfig,
    match_cfg: MatchConfig = MatchConfig(),
    utc_offset_hours: float = DEFAULT_UTC_OFFSET_H,
    window: Window | None = None,
    matched: Sequence[LinkTrajectory | None] | None = None,
    threads: int | None = None,
) -> tuple[AggregatedMobilityNetwork, PrivatizationReport]:
    """Privatize a corpus and aggregate the surviving trips."""
    out, report = privatize_trajectories(
        gps_corpus, net, cfg, match_cfg, utc_offset_hours, matched, threads
    )
    agg = aggregate(list(out.values()), window=window, source=SOURCE_DP_ANI)
    return agg, report


# -- removal-style reference anonymizers --------------------------------


def trip_remove(corpus: Sequence[LinkTrajectory]) -> list[LinkTrajectory | None]:
    """Drop every trip whose origin or destination link is traversed once."""
    counts = compute_link_counts(corpus)
    return [
        None if counts[t.links[0]] == 1 or counts[t.links[-1]] == 1 else t for t in corpus
    ]


def od_remove(corpus: Sequence[LinkTrajectory]) -> list[LinkTrajectory | None]:
    """Clip unique endpoint links; drop trips that lose all their links."""
    counts = compute_link_counts(corpus)
    out: list[LinkTrajectory | None] = []
    for t in corpus:
        links = list(t.links)
        drop_first = counts[links[0]] == 1
        if counts[links[-1]] == 1:
            links = links[:-1]
        if drop_first and links:
            links = links[1:]
        out.append(replace(t, links=tuple(links), speeds=None) if links else None)
    return out


def od_successive_remove(corpus: Sequence[LinkTrajectory]) -> list[LinkTrajectory | None]:
    """Clip runs of unique links inward from both trip ends."""
    counts = compute_link_counts(corpus)
    out: list[LinkTrajectory | None] = []
    for t in corpus:
        links = list(t.links)
        while links and counts[links[0]] == 1:
            links.pop(0)
        while links and counts[links[-1]] == 1:
            links.pop()
        out.append(replace(t, links=tuple(links), speeds=None) if links else None)
    return out


_BASELINES = {
    SOURCE_TRIP_REMOVE: trip_remove,
    SOURCE_OD_REMOVE: od_remove,
    SOURCE_OD_SUCCESSIVE: od_successive_remove,
}


def baseline_aggregate(
    name: str, corpus: Sequence[LinkTrajectory], window: Window | None = None
) -> AggregatedMobilityNetwork:
    """Aggregate of one removal-style anonymizer; ``name`` is its source tag."""
    transformed = _BASELINES[name](corpus)
    return aggregate([t for t in transformed if t is not None], window=window, source=name)


def baseline_trip_remove(
    corpus: Sequence[LinkTrajectory], window: Window | None = None
) -> AggregatedMobilityNetwork:
    return baseline_aggregate(SOURCE_TRIP_REMOVE, corpus, window)


def baseline_od_remove(
    corpus: Sequence[LinkTrajectory], window: Window | None = None
) -> AggregatedMobilityNetwork:
    return baseline_aggregate(SOURCE_OD_REMOVE, corpus, window)


def baseline_od_successive_remove(
    corpus: Sequence[LinkTrajectory], window: Window | None = None
) -> AggregatedMobilityNetwork:
    return baseline_aggregate(SOURCE_OD_SUCCESSIVE, corpus, window)
