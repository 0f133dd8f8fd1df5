"""Command-line surface and end-to-end pipeline wiring.

Exit codes: 0 success, 1 failed verification, 2 bad inputs or usage,
3 empty aggregation window.
"""

from __future__ import annotations

import argparse
import os
import sys
from datetime import date
from pathlib import Path

from . import __version__
from .aggregate import Window, aggregate
from .errors import DpMobilityError, InputFormatError
from .geometry import GeoPoint, displace
from .matching import MatchConfig
from .metrics import (
    COMPARE_COLUMNS,
    DEFAULT_EPSILONS,
    DEFAULT_MODELS,
    compare,
    intersection_density,
    network_length,
    vht,
    vhd,
    vmt,
)
from .noise import NoiseParams, verify_geo_indistinguishability
from .privatize import PrivacyConfig, match_corpus, privatize_aggregate
from .synth import SynthCityConfig, SynthTripConfig, generate_city, generate_trips
from .trajectories import WEEKDAY_LABELS, window_filter
from . import formats

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_EMPTY_WINDOW = 3

VERIFY_REFERENCE_POINT = GeoPoint(37.80, -122.30)


def _threads() -> int | None:
    """Parallelism cap from DP_MOBILITY_THREADS (0 or unset = auto)."""
    raw = os.environ.get("DP_MOBILITY_THREADS", "0")
    try:
        n = int(raw)
    except ValueError as e:
        raise DpMobilityError(f"DP_MOBILITY_THREADS must be an integer, got {raw!r}") from e
    if n < 0:
        raise DpMobilityError("DP_MOBILITY_THREADS must be >= 0")
    return (os.cpu_count() or 1) if n == 0 else n


def _parse_hour_window(text: str) -> tuple[int, int]:
    try:
        h0, h1 = text.split("-")
        window = (int(h0), int(h1))
    except ValueError as e:
        raise DpMobilityError(f"bad hour window {text!r}; expected H0-H1") from e
    if not (0 <= window[0] < window[1] <= 24):
        raise DpMobilityError(f"bad hour window {text!r}")
    return window


def _parse_days(text: str) -> frozenset[str]:
    days = frozenset(part.strip() for part in text.split(",") if part.strip())
    bad = days - set(WEEKDAY_LABELS)
    if bad:
        raise DpMobilityError(f"unknown weekday labels {sorted(bad)}; use {WEEKDAY_LABELS}")
    if not days:
        raise DpMobilityError("empty day set")
    return days


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as e:
        raise DpMobilityError(f"bad number list {text!r}") from e


def _parse_dates(text: str) -> tuple[date, ...]:
    try:
        return tuple(date.fromisoformat(part.strip()) for part in text.split(","))
    except ValueError as e:
        raise DpMobilityError(f"bad date list {text!r}; expected YYYY-MM-DD[,...]") from e


def _add_window_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--hour-window", default="13-14", help="half-open local hour range, e.g. 13-14")
    p.add_argument("--days", default="T,W,Th", help="weekday labels, e.g. T,W,Th")
    p.add_argument("--utc-offset", type=float, default=-8.0,
                   help="hours added to UTC for local day/hour binning")


def _add_corpus_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--network", required=True, help="road network (.geojson or .csv)")
    p.add_argument("--trips", required=True, help="GPS sample CSV")
    p.add_argument("--gap", type=float, default=300.0, help="trip split gap, seconds")
    p.add_argument("--snap-radius", type=float, default=50.0, help="matcher snap radius, meters")
    p.add_argument("--max-node-skip", type=int, default=3,
                   help="tolerated consecutive unsnappable samples")


def _add_privacy_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--h1", type=int, default=8, help="buffer link-count threshold")
    p.add_argument("--h2", type=int, default=3, help="buffer same-class link-count threshold")
    p.add_argument("--initial-buffer", type=float, default=20.0, help="initial buffer, meters")
    p.add_argument("--buffer-step", type=float, default=10.0, help="buffer growth step, meters")
    p.add_argument("--max-buffer", type=float, default=5000.0, help="buffer cap, meters")
    p.add_argument("--seed", type=int, default=0, help="global noise seed")
    p.add_argument("--keep-repeated", action="store_true",
                   help="do not force perturbation of repeated endpoint pairs")


def _load_windowed_corpus(args):
    net = formats.load_network(args.network)
    trips = formats.load_trips_csv(args.trips, gap_s=args.gap)
    window = Window(_parse_hour_window(args.hour_window), _parse_days(args.days))
    corpus = window_filter(trips, window.hours, window.days, args.utc_offset)
    return net, corpus, window


def _privacy_config(args, epsilon: float) -> PrivacyConfig:
    return PrivacyConfig(
        epsilon=epsilon,
        h1=args.h1,
        h2=args.h2,
        initial_buffer_m=args.initial_buffer,
        buffer_step_m=args.buffer_step,
        max_buffer_m=args.max_buffer,
        global_seed=args.seed,
        trip_gap_s=args.gap,
        perturb_repeated=not args.keep_repeated,
    )


def _config_echo(args) -> dict:
    # The output directory is where results land, not part of what they
    # contain; leaving it out lets reruns into any directory produce
    # byte-identical manifests.
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}


def cmd_privatize(args) -> int:
    net, corpus, window = _load_windowed_corpus(args)
    if not corpus:
        print("no trips in the requested window", file=sys.stderr)
        return EXIT_EMPTY_WINDOW
    cfg = _privacy_config(args, args.epsilon)
    match_cfg = MatchConfig(args.snap_radius, args.max_node_skip)
    agg, report = privatize_aggregate(
        corpus, net, cfg, match_cfg, args.utc_offset, window=window, threads=_threads()
    )
    if not agg.counts:
        print("privatization left no trips in the window", file=sys.stderr)
        return EXIT_EMPTY_WINDOW
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    agg_path = out / "privatized_aggregation.csv"
    overlay_path = out / "privatized_overlay.geojson"
    report_path = out / "privatization_report.csv"
    formats.save_aggregation_csv(agg, net, agg_path)
    formats.save_overlay_geojson(agg, net, overlay_path)
    formats.save_report_csv(report, report_path)
    formats.write_manifest(
        out / "manifest.json", "privatize", _config_echo(args),
        [args.network, args.trips], [agg_path, overlay_path, report_path], __version__,
    )
    print(
        f"privatized {report.trips_out}/{report.trips_in} trips "
        f"({report.endpoints_perturbed} endpoints perturbed, "
        f"{report.trips_excluded} trips excluded) -> {out}"
    )
    return EXIT_OK


def cmd_compare(args) -> int:
    net, corpus, window = _load_windowed_corpus(args)
    if not corpus:
        print("no trips in the requested window", file=sys.stderr)
        return EXIT_EMPTY_WINDOW
    models = tuple(part.strip() for part in args.models.split(",") if part.strip())
    unknown = set(models) - set(DEFAULT_MODELS)
    if unknown:
        print(f"unknown models: {sorted(unknown)}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    cfg = _privacy_config(args, epsilon=1.0)
    match_cfg = MatchConfig(args.snap_radius, args.max_node_skip)
    rows = compare(
        corpus, net, cfg,
        epsilons=_parse_floats(args.epsilons),
        models=models,
        match_cfg=match_cfg,
        utc_offset_hours=args.utc_offset,
        window=window,
        threads=_threads(),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table_path = out / "compare.csv"
    formats.save_compare_csv(rows, COMPARE_COLUMNS, table_path)
    formats.write_manifest(
        out / "manifest.json", "compare", _config_echo(args),
        [args.network, args.trips], [table_path], __version__,
    )
    print(f"wrote {len(rows)} rows -> {table_path}")
    return EXIT_OK


def cmd_aggregate(args) -> int:
    net, corpus, window = _load_windowed_corpus(args)
    if not corpus:
        print("no trips in the requested window", file=sys.stderr)
        return EXIT_EMPTY_WINDOW
    match_cfg = MatchConfig(args.snap_radius, args.max_node_skip)
    matched, _ = match_corpus(corpus, net, match_cfg, args.utc_offset, threads=_threads())
    trips = [t for t in matched if t is not None]
    if not trips:
        print("no matchable trips in the requested window", file=sys.stderr)
        return EXIT_EMPTY_WINDOW
    agg = aggregate(trips, window=window)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    agg_path = out / "aggregation.csv"
    overlay_path = out / "overlay.geojson"
    formats.save_aggregation_csv(agg, net, agg_path)
    formats.save_overlay_geojson(agg, net, overlay_path)
    formats.write_manifest(
        out / "manifest.json", "aggregate", _config_echo(args),
        [args.network, args.trips], [agg_path, overlay_path], __version__,
    )
    print(f"aggregated {len(trips)} trips over {len(agg.counts)} links -> {out}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    net, corpus, window = _load_windowed_corpus(args)
    if not corpus:
        print("no trips in the requested window", file=sys.stderr)
        return EXIT_EMPTY_WINDOW
    match_cfg = MatchConfig(args.snap_radius, args.max_node_skip)
    matched, n_bad = match_corpus(corpus, net, match_cfg, args.utc_offset, threads=_threads())
    trips = [t for t in matched if t is not None]
    if not trips:
        print("no matchable trips in the requested window", file=sys.stderr)
        return EXIT_EMPTY_WINDOW
    agg = aggregate(trips, window=window)
    _, histogram = intersection_density(agg, net)
    print(f"trips={len(trips)}")
    print(f"trips_unmatchable={n_bad}")
    print(f"active_links={len(agg.counts)}")
    print(f"network_length_mi={network_length(agg, net)!r}")
    print(f"vmt_mi={vmt(trips, net)!r}")
    print(f"vht_h={vht(trips, net)!r}")
    print(f"vhd_h={vhd(trips, net)!r}")
    print("intersection_density_histogram=" +
          ",".join(f"{value}:{share:.4f}" for value, share in histogram.items()))
    return EXIT_OK


def cmd_synth_network(args) -> int:
    cfg = SynthCityConfig(
        rows=args.rows, cols=args.cols, spacing_m=args.spacing,
        arterial_every=args.arterial_every, seed=args.seed,
    )
    net = generate_city(cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if out.suffix.lower() == ".csv":
        formats.save_network_csv(net, out)
    else:
        formats.save_network_geojson(net, out)
    print(f"wrote {len(net.nodes)} nodes / {len(net.links)} links -> {out}")
    return EXIT_OK


def cmd_synth_trips(args) -> int:
    net = formats.load_network(args.network)
    cfg = SynthTripConfig(
        n_trips=args.n_trips,
        n_devices=args.n_devices,
        days=_parse_dates(args.dates),
        hour_window=_parse_hour_window(args.hour_window),
        od_popularity_alpha=args.od_alpha,
        gps_interval_s=args.interval,
        jitter_sigma_m=args.jitter,
        repeat_fraction=args.repeat_fraction,
        seed=args.seed,
        utc_offset_hours=args.utc_offset,
    )
    corpus, truth = generate_trips(net, cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    formats.save_trips_csv(corpus, out)
    written = [out]
    if args.truth:
        formats.save_link_corpus_csv(truth, args.truth)
        written.append(Path(args.truth))
    print(f"wrote {len(corpus)} trips -> {', '.join(str(p) for p in written)}")
    return EXIT_OK


def cmd_verify_dp(args) -> int:
    params = NoiseParams(args.epsilon, args.radius)
    x0 = VERIFY_REFERENCE_POINT
    x1 = displace(x0, args.distance, 0.0) if args.distance > 0 else x0
    ratio = verify_geo_indistinguishability(
        x0, x1, params, args.samples, args.cell, seed=args.seed
    )
    bound = args.epsilon / args.radius * args.distance
    print(f"max_log_ratio={ratio!r}")
    print(f"bound={bound!r} slack={args.slack!r}")
    if ratio <= bound + args.slack:
        print("within bound")
        return EXIT_OK
    print("EXCEEDS bound", file=sys.stderr)
    return EXIT_VERIFY_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpmobility",
        description="Privacy-preserving aggregated mobility networks from GPS trajectories",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("privatize", help="perturb unique trip endpoints and aggregate")
    _add_corpus_args(p)
    _add_window_args(p)
    _add_privacy_args(p)
    p.add_argument("--epsilon", type=float, required=True, help="privacy parameter")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_privatize)

    p = sub.add_parser("compare", help="sweep models and epsilons, emit a metrics table")
    _add_corpus_args(p)
    _add_window_args(p)
    _add_privacy_args(p)
    p.add_argument("--models", default=",".join(DEFAULT_MODELS))
    p.add_argument("--epsilons", default=",".join(str(e) for e in DEFAULT_EPSILONS))
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("aggregate", help="aggregate raw matched trips over a window")
    _add_corpus_args(p)
    _add_window_args(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("metrics", help="print utility metrics of the raw corpus")
    _add_corpus_args(p)
    _add_window_args(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("synth", help="synthetic inputs")
    synth_sub = p.add_subparsers(dest="synth_command", required=True)

    q = synth_sub.add_parser("network", help="generate a grid city network")
    q.add_argument("--rows", type=int, default=20)
    q.add_argument("--cols", type=int, default=20)
    q.add_argument("--spacing", type=float, default=100.0, help="node spacing, meters")
    q.add_argument("--arterial-every", type=int, default=5)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True, help=".geojson or .csv path")
    q.set_defaults(func=cmd_synth_network)

    q = synth_sub.add_parser("trips", help="generate a GPS trip corpus")
    q.add_argument("--network", required=True)
    q.add_argument("--n-trips", type=int, default=600, help="trips per day")
    q.add_argument("--n-devices", type=int, default=400)
    q.add_argument("--dates", required=True, help="comma-separated YYYY-MM-DD dates")
    q.add_argument("--hour-window", default="13-14")
    q.add_argument("--od-alpha", type=float, default=1.0, help="endpoint popularity exponent")
    q.add_argument("--interval", type=float, default=30.0, help="GPS sampling interval, seconds")
    q.add_argument("--jitter", type=float, default=5.0, help="GPS noise sigma, meters")
    q.add_argument("--repeat-fraction", type=float, default=0.0)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--utc-offset", type=float, default=-8.0)
    q.add_argument("--out", required=True, help="trips CSV path")
    q.add_argument("--truth", default=None, help="optional ground-truth link CSV path")
    q.set_defaults(func=cmd_synth_trips)

    p = sub.add_parser("verify-dp", help="empirical geo-indistinguishability check")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--radius", type=float, required=True, help="noise scaling radius, meters")
    p.add_argument("--distance", type=float, required=True,
                   help="separation of the two test points, meters")
    p.add_argument("--samples", type=int, default=10**6)
    p.add_argument("--cell", type=float, default=20.0, help="histogram cell size, meters")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--slack", type=float, default=0.3, help="allowed statistical slack")
    p.set_defaults(func=cmd_verify_dp)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputFormatError as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except (DpMobilityError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
