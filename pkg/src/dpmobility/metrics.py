"""Utility metrics over aggregated mobility networks and trip corpora."""

from __future__ import annotations

from collections import Counter
from dataclasses import replace
from typing import Mapping, Sequence

from .aggregate import AggregatedMobilityNetwork, Window, aggregate
from .errors import WindowMismatchError
from .matching import MatchConfig
from .network import LinkId, NodeId, RoadNetwork
from .privatize import (
    _BASELINES,
    DESTINATION,
    ORIGIN,
    EndpointDecision,
    PrivacyConfig,
    PrivatizationReport,
    SOURCE_DP_ANI,
    match_corpus,
    privatize_trajectories,
)
from .trajectories import DEFAULT_UTC_OFFSET_H, GpsTrajectory, LinkTrajectory

METERS_PER_MILE = 1609.344

MODEL_RAW = "raw"
DEFAULT_MODELS = (MODEL_RAW, SOURCE_DP_ANI) + tuple(_BASELINES)
DEFAULT_EPSILONS = (0.05, 0.1, 1.0, 1.5, 2.0, 5.0, 10.0, 15.0)

COMPARE_COLUMNS = (
    "model",
    "epsilon",
    "network_length_mi",
    "vmt_mi",
    "vht_h",
    "vhd_h",
    "unchanged_slc_od",
    "privatized_ratio",
    "trips_excluded",
)


def network_length(agg: AggregatedMobilityNetwork, net: RoadNetwork) -> float:
    """Total length in miles of the links active in the aggregation."""
    return sum(net.links[lid].length_m for lid in agg.counts) / METERS_PER_MILE


def vmt(corpus: Sequence[LinkTrajectory], net: RoadNetwork) -> float:
    """Vehicle miles traveled: traversal lengths summed with multiplicity."""
    meters = sum(net.links[lid].length_m for t in corpus for lid in t.links)
    return meters / METERS_PER_MILE


def vht(corpus: Sequence[LinkTrajectory], net: RoadNetwork) -> float:
    """Vehicle hours traveled.

    Trips carrying an observed speed for every link use those; all other
    trips are timed at free-flow speeds.
    """
    seconds = 0.0
    for t in corpus:
        if t.speeds is not None:
            seconds += sum(
                net.links[lid].length_m / s for lid, s in zip(t.links, t.speeds)
            )
        else:
            seconds += sum(
                net.links[lid].length_m / net.links[lid].speed_mps for lid in t.links
            )
    return seconds / 3600.0


def vhd(
    corpus: Sequence[LinkTrajectory],
    net: RoadNetwork,
    observed_speeds: Mapping[LinkId, float] | None = None,
) -> float:
    """Vehicle hours of delay versus free flow; zero without observations."""
    if not observed_speeds:
        return 0.0
    seconds = 0.0
    for t in corpus:
        for lid in t.links:
            obs = observed_speeds.get(lid)
            if obs is None:
                continue
            link = net.links[lid]
            seconds += max(0.0, link.length_m / obs - link.length_m / link.speed_mps)
    return seconds / 3600.0


def intersection_density(
    agg: AggregatedMobilityNetwork, net: RoadNetwork
) -> tuple[dict[NodeId, int], dict[int, float]]:
    """Active incident link count per node, plus its unit-mass histogram."""
    density = {nid: 0 for nid in net.nodes}
    for lid in agg.counts:
        link = net.links[lid]
        density[link.from_node] += 1
        density[link.to_node] += 1
    hist = Counter(density.values())
    total = sum(hist.values())
    histogram = {value: count / total for value, count in sorted(hist.items())}
    return density, histogram


def unchanged_single_count_od(
    raw: AggregatedMobilityNetwork,
    raw_ods: Mapping[int, tuple[LinkId, LinkId]],
    privatized: AggregatedMobilityNetwork,
    report: PrivatizationReport,
) -> tuple[int, float]:
    """Count raw single-count endpoint links surviving privatization.

    A link counts as unchanged when it was the origin or destination link
    of a trip with a raw count of one, and after privatization it is still
    that trip's endpoint link with a count of one.  The ratio is the
    privatized fraction, 1 - unchanged/total (1.0 when there was nothing
    to privatize).
    """
    if raw.window != privatized.window:
        raise WindowMismatchError(
            f"raw window {raw.window} != privatized window {privatized.window}"
        )
    single = {
        lid
        for od in raw_ods.values()
        for lid in od
        if raw.counts.get(lid) == 1
    }
    new_link = {(d.trip, d.end): d.new_link for d in report.decisions}
    unchanged = set()
    for trip, (o_link, d_link) in raw_ods.items():
        if o_link in single and new_link.get((trip, ORIGIN)) == o_link:
            if privatized.counts.get(o_link) == 1:
                unchanged.add(o_link)
        if d_link in single and new_link.get((trip, DESTINATION)) == d_link:
            if privatized.counts.get(d_link) == 1:
                unchanged.add(d_link)
    total = len(single)
    ratio = 1.0 - len(unchanged) / total if total else 1.0
    return len(unchanged), ratio


def _identity_report(
    raw_ods: Mapping[int, tuple[LinkId, LinkId]],
    transformed: Mapping[int, LinkTrajectory],
    trips_in: int,
) -> PrivatizationReport:
    """Decision list equivalent for removal-style models: surviving trips
    keep their clipped endpoint links, dropped trips have no decisions."""
    decisions = []
    for trip, t in transformed.items():
        o_link, d_link = raw_ods[trip]
        decisions.append(EndpointDecision(trip, ORIGIN, o_link, False, None, t.links[0], None))
        decisions.append(
            EndpointDecision(trip, DESTINATION, d_link, False, None, t.links[-1], None)
        )
    dropped = trips_in - len(transformed)
    return PrivatizationReport(
        trips_in=trips_in,
        trips_out=len(transformed),
        excluded={"removed": dropped} if dropped else {},
        decisions=decisions,
    )


def compare(
    gps_corpus: Sequence[GpsTrajectory],
    net: RoadNetwork,
    cfg: PrivacyConfig,
    epsilons: Sequence[float] = DEFAULT_EPSILONS,
    models: Sequence[str] = DEFAULT_MODELS,
    match_cfg: MatchConfig = MatchConfig(),
    utc_offset_hours: float = DEFAULT_UTC_OFFSET_H,
    window: Window | None = None,
    threads: int | None = None,
) -> list[dict]:
    """Run every requested model and emit one metrics row per run.

    Removal-style models and the raw reference run once; the adaptive-noise
    model runs once per epsilon.  Rows are dictionaries keyed by
    COMPARE_COLUMNS; ``epsilon`` is None for epsilon-independent models.
    """
    unknown = set(models) - set(DEFAULT_MODELS)
    if unknown:
        raise ValueError(f"unknown models: {sorted(unknown)}")

    matched, n_unmatchable = match_corpus(
        gps_corpus, net, match_cfg, utc_offset_hours, threads
    )
    raw_trips = {i: t for i, t in enumerate(matched) if t is not None}
    raw_corpus = list(raw_trips.values())
    raw_agg = aggregate(raw_corpus, window=window)
    raw_ods = {i: (t.links[0], t.links[-1]) for i, t in raw_trips.items()}

    def row(model, epsilon, corpus, agg, unchanged, ratio, excluded):
        return {
            "model": model,
            "epsilon": epsilon,
            "network_length_mi": network_length(agg, net),
            "vmt_mi": vmt(corpus, net),
            "vht_h": vht(corpus, net),
            "vhd_h": vhd(corpus, net),
            "unchanged_slc_od": unchanged,
            "privatized_ratio": ratio,
            "trips_excluded": excluded,
        }

    rows = []
    for model in models:
        if model == MODEL_RAW:
            raw_report = _identity_report(raw_ods, raw_trips, len(gps_corpus))
            unchanged, ratio = unchanged_single_count_od(raw_agg, raw_ods, raw_agg, raw_report)
            rows.append(row(model, None, raw_corpus, raw_agg, unchanged, ratio, n_unmatchable))
        elif model in _BASELINES:
            aligned = _BASELINES[model](raw_corpus)
            index = list(raw_trips)
            transformed = {
                index[pos]: t for pos, t in enumerate(aligned) if t is not None
            }
            corpus = list(transformed.values())
            agg = aggregate(corpus, window=window, source=model)
            report = _identity_report(raw_ods, transformed, len(gps_corpus))
            unchanged, ratio = unchanged_single_count_od(raw_agg, raw_ods, agg, report)
            rows.append(
                row(model, None, corpus, agg, unchanged, ratio, len(gps_corpus) - len(corpus))
            )
        else:  # adaptive noise, once per epsilon
            for eps in epsilons:
                out, report = privatize_trajectories(
                    gps_corpus,
                    net,
                    replace(cfg, epsilon=eps),
                    match_cfg,
                    utc_offset_hours,
                    matched=matched,
                    threads=threads,
                )
                corpus = list(out.values())
                agg = aggregate(corpus, window=window, source=SOURCE_DP_ANI)
                unchanged, ratio = unchanged_single_count_od(raw_agg, raw_ods, agg, report)
                rows.append(
                    row(SOURCE_DP_ANI, eps, corpus, agg, unchanged, ratio, report.trips_excluded)
                )
    return rows
