"""File formats: network GeoJSON/CSV, trip CSV, aggregation and report
serialization, and run manifests.

All writers emit UTF-8 with LF line endings, '.' decimal separators, and a
fixed column order, so identical runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from .aggregate import AggregatedMobilityNetwork
from .errors import InputFormatError
from .geometry import GeoPoint, haversine_distance
from .network import Link, LinkId, NodeId, RoadNetwork
from .privatize import EndpointDecision, PrivatizationReport
from .trajectories import GpsSample, GpsTrajectory, LinkTrajectory, split_trips

TRIP_COLUMNS = ("device_id", "timestamp", "lat", "lon", "speed_mps", "heading_deg")
AGGREGATION_COLUMNS = ("link_id", "count", "length_m", "fc")
REPORT_COLUMNS = ("trip", "end", "original_link", "perturbed", "matched_link", "new_link", "radius_m")
NETWORK_CSV_COLUMNS = (
    "id", "from_node", "to_node", "from_lat", "from_lon", "to_lat", "to_lon",
    "fc", "speed_mps", "lanes", "length_m",
)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence],
               preamble: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for line in preamble:
            f.write(f"# {line}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _read_csv(path: str | Path, required: Sequence[str]):
    """Yield (line_number, row dict); '#' preamble lines are returned first
    as a dict under the key None."""
    preamble: list[str] = []
    with open(path, encoding="utf-8", newline="") as f:
        pos = f.tell()
        line = f.readline()
        lineno = 0
        while line.startswith("#"):
            preamble.append(line[1:].strip())
            pos = f.tell()
            lineno += 1
            line = f.readline()
        f.seek(pos)
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise InputFormatError(str(path), lineno + 1, "missing header row")
        missing = set(required) - set(reader.fieldnames)
        if missing:
            raise InputFormatError(
                str(path), lineno + 1, f"missing columns: {sorted(missing)}"
            )
        yield preamble
        for row in reader:
            yield lineno + reader.line_num, row


# -- timestamps ----------------------------------------------------------


def format_timestamp(t: float) -> str:
    dt = datetime.fromtimestamp(t, timezone.utc)
    text = dt.isoformat(timespec="microseconds" if dt.microsecond else "seconds")
    return text.replace("+00:00", "Z")


def parse_timestamp(text: str) -> float:
    return datetime.fromisoformat(text.replace("Z", "+00:00")).timestamp()


# -- road networks ---------------------------------------------------------


def _link_from_properties(props: dict, geometry: tuple[GeoPoint, ...], where: str) -> Link:
    try:
        length = props.get("length_m")
        if length in (None, ""):
            length = sum(haversine_distance(a, b) for a, b in zip(geometry, geometry[1:]))
        return Link(
            id=str(props["id"]),
            from_node=str(props["from"]),
            to_node=str(props["to"]),
            geometry=geometry,
            length_m=float(length),
            functional_class=int(props["fc"]),
            speed_mps=float(props["speed_mps"]),
            lanes=int(props.get("lanes") or 1),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise InputFormatError(where, None, f"bad link properties: {e}") from e


def load_network_geojson(path: str | Path) -> RoadNetwork:
    """Network from a FeatureCollection of LineString links.

    Required feature properties: id, from, to, fc, speed_mps; optional:
    length_m (computed from the geometry when absent), lanes.  Node
    positions come from the first/last geometry vertices.
    """
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise InputFormatError(str(path), e.lineno, e.msg) from e
    if doc.get("type") != "FeatureCollection":
        raise InputFormatError(str(path), None, "expected a FeatureCollection")
    nodes: dict[NodeId, GeoPoint] = {}
    links: dict[LinkId, Link] = {}
    for i, feature in enumerate(doc.get("features", [])):
        where = f"{path} (feature {i})"
        geom = feature.get("geometry") or {}
        if geom.get("type") != "LineString":
            raise InputFormatError(where, None, "expected LineString geometry")
        coords = geom.get("coordinates") or []
        if len(coords) < 2:
            raise InputFormatError(where, None, "LineString needs at least 2 positions")
        pts = tuple(GeoPoint(float(lat), float(lon)) for lon, lat in coords)
        link = _link_from_properties(feature.get("properties") or {}, pts, where)
        links[link.id] = link
        nodes.setdefault(link.from_node, pts[0])
        nodes.setdefault(link.to_node, pts[-1])
    return RoadNetwork(nodes, links)


def save_network_geojson(net: RoadNetwork, path: str | Path) -> None:
    features = []
    for lid in sorted(net.links):
        link = net.links[lid]
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "LineString",
                    "coordinates": [[p.lon, p.lat] for p in link.geometry],
                },
                "properties": {
                    "id": link.id,
                    "from": link.from_node,
                    "to": link.to_node,
                    "fc": link.functional_class,
                    "length_m": link.length_m,
                    "speed_mps": link.speed_mps,
                    "lanes": link.lanes,
                },
            }
        )
    _dump_json({"type": "FeatureCollection", "features": features}, path)


def load_network_csv(path: str | Path) -> RoadNetwork:
    """Network from a straight-line edge list (see NETWORK_CSV_COLUMNS)."""
    nodes: dict[NodeId, GeoPoint] = {}
    links: dict[LinkId, Link] = {}
    rows = _read_csv(path, [c for c in NETWORK_CSV_COLUMNS if c != "length_m"])
    next(rows)  # preamble
    for lineno, row in rows:
        try:
            a = GeoPoint(float(row["from_lat"]), float(row["from_lon"]))
            b = GeoPoint(float(row["to_lat"]), float(row["to_lon"]))
            link = _link_from_properties(
                {
                    "id": row["id"],
                    "from": row["from_node"],
                    "to": row["to_node"],
                    "fc": row["fc"],
                    "speed_mps": row["speed_mps"],
                    "lanes": row.get("lanes") or 1,
                    "length_m": row.get("length_m") or None,
                },
                (a, b),
                f"{path}:{lineno}",
            )
        except ValueError as e:
            raise InputFormatError(str(path), lineno, str(e)) from e
        links[link.id] = link
        nodes.setdefault(link.from_node, a)
        nodes.setdefault(link.to_node, b)
    return RoadNetwork(nodes, links)


def save_network_csv(net: RoadNetwork, path: str | Path) -> None:
    rows = []
    for lid in sorted(net.links):
        link = net.links[lid]
        a, b = link.geometry[0], link.geometry[-1]
        rows.append(
            (link.id, link.from_node, link.to_node, a.lat, a.lon, b.lat, b.lon,
             link.functional_class, link.speed_mps, link.lanes, link.length_m)
        )
    _write_csv(path, NETWORK_CSV_COLUMNS, rows)


def load_network(path: str | Path) -> RoadNetwork:
    """Dispatch on file extension: .geojson/.json or .csv."""
    suffix = Path(path).suffix.lower()
    if suffix in (".geojson", ".json"):
        return load_network_geojson(path)
    if suffix == ".csv":
        return load_network_csv(path)
    raise InputFormatError(str(path), None, f"unsupported network format {suffix!r}")


# -- trips -----------------------------------------------------------------


def save_trips_csv(corpus: Sequence[GpsTrajectory], path: str | Path) -> None:
    rows = []
    for traj in corpus:
        for s in traj.samples:
            rows.append(
                (s.device, format_timestamp(s.t), s.point.lat, s.point.lon,
                 s.speed_mps, s.heading_deg)
            )
    _write_csv(path, TRIP_COLUMNS, rows)


def load_trips_csv(path: str | Path, gap_s: float = 300.0) -> list[GpsTrajectory]:
    """Read samples, group per device, sort by time, split into trips.

    Rows need not be globally sorted.  Trips are ordered by device id and
    start time.
    """
    per_device: dict[str, list[GpsSample]] = {}
    rows = _read_csv(path, ("device_id", "timestamp", "lat", "lon"))
    next(rows)
    for lineno, row in rows:
        try:
            sample = GpsSample(
                device=row["device_id"],
                t=parse_timestamp(row["timestamp"]),
                point=GeoPoint(float(row["lat"]), float(row["lon"])),
                speed_mps=float(row["speed_mps"]) if row.get("speed_mps") else None,
                heading_deg=float(row["heading_deg"]) if row.get("heading_deg") else None,
            )
        except ValueError as e:
            raise InputFormatError(str(path), lineno, str(e)) from e
        per_device.setdefault(sample.device, []).append(sample)
    corpus: list[GpsTrajectory] = []
    for device in sorted(per_device):
        stream = sorted(per_device[device], key=lambda s: s.t)
        corpus.extend(split_trips(stream, gap_s))
    return corpus


# -- aggregations and reports ----------------------------------------------


def save_aggregation_csv(agg: AggregatedMobilityNetwork, net: RoadNetwork,
                         path: str | Path) -> None:
    rows = [
        (lid, agg.counts[lid], net.links[lid].length_m, net.links[lid].functional_class)
        for lid in sorted(agg.counts)
    ]
    preamble = [f"source={agg.source}"]
    if agg.window is not None:
        preamble.append(f"window={agg.window.label()}")
    _write_csv(path, AGGREGATION_COLUMNS, rows, preamble)


def load_aggregation_csv(path: str | Path) -> tuple[dict[LinkId, int], str]:
    rows = _read_csv(path, AGGREGATION_COLUMNS)
    preamble = next(rows)
    source = "raw"
    for line in preamble:
        if line.startswith("source="):
            source = line.split("=", 1)[1]
    counts: dict[LinkId, int] = {}
    for lineno, row in rows:
        try:
            counts[row["link_id"]] = int(row["count"])
        except ValueError as e:
            raise InputFormatError(str(path), lineno, str(e)) from e
    return counts, source


def save_overlay_geojson(agg: AggregatedMobilityNetwork, net: RoadNetwork,
                         path: str | Path) -> None:
    """Active links with their counts, for map rendering."""
    features = []
    for lid in sorted(agg.counts):
        link = net.links[lid]
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "LineString",
                    "coordinates": [[p.lon, p.lat] for p in link.geometry],
                },
                "properties": {
                    "id": link.id,
                    "count": agg.counts[lid],
                    "fc": link.functional_class,
                    "length_m": link.length_m,
                    "source": agg.source,
                },
            }
        )
    _dump_json({"type": "FeatureCollection", "features": features}, path)


def load_overlay_geojson(path: str | Path) -> tuple[dict[LinkId, int], str]:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    counts: dict[LinkId, int] = {}
    source = "raw"
    for feature in doc.get("features", []):
        props = feature["properties"]
        counts[props["id"]] = int(props["count"])
        source = props.get("source", source)
    return counts, source


def save_report_csv(report: PrivatizationReport, path: str | Path) -> None:
    preamble = [
        f"trips_in={report.trips_in}",
        f"trips_out={report.trips_out}",
        f"endpoints_perturbed={report.endpoints_perturbed}",
        f"endpoints_unchanged_single_count={report.endpoints_unchanged_single_count}",
    ]
    for cause in sorted(report.excluded):
        preamble.append(f"excluded.{cause}={report.excluded[cause]}")
    rows = [
        (d.trip, d.end, d.original_link, d.perturbed, d.matched_link, d.new_link, d.radius_m)
        for d in report.decisions
    ]
    _write_csv(path, REPORT_COLUMNS, rows, preamble)


def load_report_csv(path: str | Path) -> PrivatizationReport:
    rows = _read_csv(path, REPORT_COLUMNS)
    preamble = next(rows)
    meta: dict[str, int] = {}
    excluded: dict[str, int] = {}
    for line in preamble:
        key, _, value = line.partition("=")
        if key.startswith("excluded."):
            excluded[key[len("excluded."):]] = int(value)
        else:
            meta[key] = int(value)
    decisions = []
    for lineno, row in rows:
        try:
            decisions.append(
                EndpointDecision(
                    trip=int(row["trip"]),
                    end=row["end"],
                    original_link=row["original_link"],
                    perturbed=row["perturbed"] == "true",
                    matched_link=row["matched_link"] or None,
                    new_link=row["new_link"],
                    radius_m=float(row["radius_m"]) if row["radius_m"] else None,
                )
            )
        except ValueError as e:
            raise InputFormatError(str(path), lineno, str(e)) from e
    return PrivatizationReport(
        trips_in=meta.get("trips_in", 0),
        trips_out=meta.get("trips_out", 0),
        excluded=excluded,
        endpoints_perturbed=meta.get("endpoints_perturbed", 0),
        endpoints_unchanged_single_count=meta.get("endpoints_unchanged_single_count", 0),
        decisions=decisions,
    )


# -- ground-truth link corpora ----------------------------------------------

TRUTH_COLUMNS = ("trip", "device", "day", "hour", "links")


def save_link_corpus_csv(corpus: Sequence[LinkTrajectory], path: str | Path) -> None:
    rows = [
        (i, t.device, t.day.isoformat(), t.hour, "|".join(t.links))
        for i, t in enumerate(corpus)
    ]
    _write_csv(path, TRUTH_COLUMNS, rows)


def load_link_corpus_csv(path: str | Path) -> list[LinkTrajectory]:
    rows = _read_csv(path, TRUTH_COLUMNS)
    next(rows)
    out = []
    for lineno, row in rows:
        try:
            out.append(
                LinkTrajectory(
                    device=row["device"],
                    day=date.fromisoformat(row["day"]),
                    hour=int(row["hour"]),
                    links=tuple(row["links"].split("|")),
                )
            )
        except ValueError as e:
            raise InputFormatError(str(path), lineno, str(e)) from e
    return out


# -- compare tables ----------------------------------------------------------


def save_compare_csv(rows: Sequence[dict], columns: Sequence[str], path: str | Path) -> None:
    _write_csv(path, columns, [[row[c] for c in columns] for row in rows])


def load_compare_csv(path: str | Path) -> list[dict[str, str]]:
    rows = _read_csv(path, ("model",))
    next(rows)
    return [row for _, row in rows]


# -- manifests ----------------------------------------------------------------


def _dump_json(obj, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(obj, f, sort_keys=True, indent=2)
        f.write("\n")


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(
    path: str | Path,
    command: str,
    config: dict,
    inputs: Sequence[str | Path],
    outputs: Sequence[str | Path],
    version: str,
) -> None:
    """Record everything needed to reproduce a run byte-for-byte."""
    manifest = {
        "artifact_version": version,
        "command": command,
        "config": config,
        "inputs": {Path(p).name: sha256_file(p) for p in inputs},
        "outputs": {Path(p).name: sha256_file(p) for p in outputs},
    }
    _dump_json(manifest, path)


def read_manifest(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as f:
        return json.load(f)
