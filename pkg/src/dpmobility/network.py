"""Directed road network: link attributes, spatial queries, shortest paths.

The network is immutable after construction.  Radius queries run against a
uniform grid index over the link geometries (cell size 100 m); candidate
sets from the grid are always re-filtered with exact distances, so the
index only affects speed, never results.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from .errors import NetworkError, NoCandidateError, NoPathError
from .geometry import (
    GeoPoint,
    PlanarPoint,
    haversine_distance,
    point_to_segment,
    project,
    validate_geopoint,
)

NodeId = str
LinkId = str

GRID_CELL_M = 100.0

# Road-capacity category: arterials low, local/rural streets high.
MIN_FUNCTIONAL_CLASS = 1
MAX_FUNCTIONAL_CLASS = 5


@dataclass(frozen=True)
class Link:
    """One directed road segment between two nodes."""

    id: LinkId
    from_node: NodeId
    to_node: NodeId
    geometry: tuple[GeoPoint, ...]
    length_m: float
    functional_class: int
    speed_mps: float
    lanes: int = 1


class RoadNetwork:
    """Weighted digraph of links plus a grid index for radius queries."""

    def __init__(self, nodes: dict[NodeId, GeoPoint], links: dict[LinkId, Link]):
        self.nodes: dict[NodeId, GeoPoint] = dict(nodes)
        self.links: dict[LinkId, Link] = dict(links)
        self._validate()

        adjacency: dict[NodeId, list[LinkId]] = {n: [] for n in self.nodes}
        for lid in sorted(self.links):
            adjacency[self.links[lid].from_node].append(lid)
        self.adjacency: dict[NodeId, tuple[LinkId, ...]] = {
            n: tuple(out) for n, out in adjacency.items()
        }
        # (link id, head node, length) triples, presorted for the heap.
        self._out: dict[NodeId, tuple[tuple[LinkId, NodeId, float], ...]] = {
            n: tuple((lid, self.links[lid].to_node, self.links[lid].length_m) for lid in out)
            for n, out in self.adjacency.items()
        }

        lats = [p.lat for p in self.nodes.values()]
        lons = [p.lon for p in self.nodes.values()]
        self._anchor = GeoPoint(sum(lats) / len(lats), sum(lons) / len(lons))
        self._build_index()

    # -- construction ---------------------------------------------------

    def _validate(self) -> None:
        if not self.nodes:
            raise NetworkError("network has no nodes")
        for nid, p in self.nodes.items():
            try:
                validate_geopoint(p)
            except ValueError as e:
                raise NetworkError(f"node {nid!r}: {e}") from e
        for lid, link in self.links.items():
            if link.id != lid:
                raise NetworkError(f"link key {lid!r} does not match link id {link.id!r}")
            if link.from_node not in self.nodes:
                raise NetworkError(f"link {lid!r}: unknown from-node {link.from_node!r}")
            if link.to_node not in self.nodes:
                raise NetworkError(f"link {lid!r}: unknown to-node {link.to_node!r}")
            if len(link.geometry) < 2:
                raise NetworkError(f"link {lid!r}: geometry needs at least 2 points")
            for p in link.geometry:
                try:
                    validate_geopoint(p)
                except ValueError as e:
                    raise NetworkError(f"link {lid!r}: {e}") from e
            if not (link.length_m > 0.0):
                raise NetworkError(f"link {lid!r}: non-positive length {link.length_m}")
            chords = sum(
                haversine_distance(a, b) for a, b in zip(link.geometry, link.geometry[1:])
            )
            if link.length_m < 0.999 * chords:
                raise NetworkError(
                    f"link {lid!r}: length {link.length_m:.2f} m inconsistent with "
                    f"geometry chord sum {chords:.2f} m"
                )
            if not (MIN_FUNCTIONAL_CLASS <= link.functional_class <= MAX_FUNCTIONAL_CLASS):
                raise NetworkError(
                    f"link {lid!r}: functional class {link.functional_class} outside "
                    f"[{MIN_FUNCTIONAL_CLASS}, {MAX_FUNCTIONAL_CLASS}]"
                )
            if not (link.speed_mps > 0.0):
                raise NetworkError(f"link {lid!r}: non-positive speed {link.speed_mps}")
            if link.lanes < 1:
                raise NetworkError(f"link {lid!r}: lanes must be >= 1")

    def _index_xy(self, p: GeoPoint) -> tuple[float, float]:
        pp = project(p, self._anchor)
        return pp.x, pp.y

    def _build_index(self) -> None:
        self._grid: dict[tuple[int, int], list[LinkId]] = {}
        self._node_grid: dict[tuple[int, int], list[NodeId]] = {}
        cells_min = [math.inf, math.inf]
        cells_max = [-math.inf, -math.inf]

        def cell(x: float, y: float) -> tuple[int, int]:
            return (math.floor(x / GRID_CELL_M), math.floor(y / GRID_CELL_M))

        for lid in sorted(self.links):
            pts = [self._index_xy(p) for p in self.links[lid].geometry]
            seen: set[tuple[int, int]] = set()
            for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
                ca = cell(min(x0, x1), min(y0, y1))
                cb = cell(max(x0, x1), max(y0, y1))
                for ix in range(ca[0], cb[0] + 1):
                    for iy in range(ca[1], cb[1] + 1):
                        seen.add((ix, iy))
            for c in seen:
                self._grid.setdefault(c, []).append(lid)
                cells_min[0] = min(cells_min[0], c[0])
                cells_min[1] = min(cells_min[1], c[1])
                cells_max[0] = max(cells_max[0], c[0])
                cells_max[1] = max(cells_max[1], c[1])

        for nid in sorted(self.nodes):
            c = cell(*self._index_xy(self.nodes[nid]))
            self._node_grid.setdefault(c, []).append(nid)
            cells_min[0] = min(cells_min[0], c[0])
            cells_min[1] = min(cells_min[1], c[1])
            cells_max[0] = max(cells_max[0], c[0])
            cells_max[1] = max(cells_max[1], c[1])

        self._cells_min = (int(cells_min[0]), int(cells_min[1]))
        self._cells_max = (int(cells_max[0]), int(cells_max[1]))
        span_x = (self._cells_max[0] - self._cells_min[0] + 2) * GRID_CELL_M
        span_y = (self._cells_max[1] - self._cells_min[1] + 2) * GRID_CELL_M
        self._span_m = math.hypot(span_x, span_y)

    # -- spatial queries ------------------------------------------------

    def _cells_in_range(
        self, center: GeoPoint, radius: float
    ) -> tuple[tuple[int, int], tuple[int, int]]:
        # Pad for the scale drift between the index frame (network anchor)
        # and the exact per-query frame; exact filtering removes the excess.
        pad = 0.05 * radius + 2.0 * GRID_CELL_M
        x, y = self._index_xy(center)
        r = radius + pad
        ix0 = max(math.floor((x - r) / GRID_CELL_M), self._cells_min[0])
        iy0 = max(math.floor((y - r) / GRID_CELL_M), self._cells_min[1])
        ix1 = min(math.floor((x + r) / GRID_CELL_M), self._cells_max[0])
        iy1 = min(math.floor((y + r) / GRID_CELL_M), self._cells_max[1])
        return (ix0, iy0), (ix1, iy1)

    def _candidate_links(self, center: GeoPoint, radius: float) -> set[LinkId]:
        (ix0, iy0), (ix1, iy1) = self._cells_in_range(center, radius)
        out: set[LinkId] = set()
        for ix in range(ix0, ix1 + 1):
            for iy in range(iy0, iy1 + 1):
                bucket = self._grid.get((ix, iy))
                if bucket:
                    out.update(bucket)
        return out

    def distance_to_link(self, p: GeoPoint, link_id: LinkId) -> float:
        """Minimal distance from ``p`` to the link's polyline, in meters."""
        origin = PlanarPoint(0.0, 0.0, p)
        geom = self.links[link_id].geometry
        pts = [project(g, p) for g in geom]
        best = math.inf
        for a, b in zip(pts, pts[1:]):
            d, _ = point_to_segment(origin, a, b)
            if d < best:
                best = d
        return best

    def links_within(self, center: GeoPoint, radius: float) -> set[LinkId]:
        """Exactly the links whose geometry comes within ``radius`` of ``center``."""
        if radius < 0.0:
            raise ValueError(f"negative radius: {radius}")
        return {
            lid
            for lid in self._candidate_links(center, radius)
            if self.distance_to_link(center, lid) <= radius
        }

    def links_within_fc(self, center: GeoPoint, radius: float, fc: int) -> set[LinkId]:
        """Radius query restricted to one functional class."""
        if not (MIN_FUNCTIONAL_CLASS <= fc <= MAX_FUNCTIONAL_CLASS):
            raise ValueError(f"functional class out of range: {fc}")
        return {
            lid for lid in self.links_within(center, radius)
            if self.links[lid].functional_class == fc
        }

    def nearest_link(self, p: GeoPoint, candidates: set[LinkId] | None = None) -> LinkId:
        """Closest link to ``p``; ties broken by smallest link id.

        With ``candidates`` given, only those links compete.  Raises
        :class:`NoCandidateError` on an empty candidate set or network.
        """
        if candidates is not None:
            if not candidates:
                raise NoCandidateError("empty candidate set")
            return min(candidates, key=lambda lid: (self.distance_to_link(p, lid), lid))
        if not self.links:
            raise NoCandidateError("network has no links")
        r = GRID_CELL_M
        while r <= self._span_m:
            hits = [
                (d, lid)
                for lid in self._candidate_links(p, r)
                if (d := self.distance_to_link(p, lid)) <= r
            ]
            if hits:
                return min(hits)[1]
            r *= 2.0
        return min(self.links, key=lambda lid: (self.distance_to_link(p, lid), lid))

    def nearest_node(self, p: GeoPoint, within: float | None = None) -> NodeId | None:
        """Closest node to ``p``; ``None`` if none lies within ``within`` meters."""
        if within is not None:
            (ix0, iy0), (ix1, iy1) = self._cells_in_range(p, within)
            best: tuple[float, NodeId] | None = None
            for ix in range(ix0, ix1 + 1):
                for iy in range(iy0, iy1 + 1):
                    for nid in self._node_grid.get((ix, iy), ()):
                        d = haversine_distance(p, self.nodes[nid])
                        if d <= within and (best is None or (d, nid) < best):
                            best = (d, nid)
            return best[1] if best else None
        return min(self.nodes, key=lambda nid: (haversine_distance(p, self.nodes[nid]), nid))

    # -- routing ----------------------------------------------------------

    def shortest_path(self, from_node: NodeId, to_node: NodeId) -> list[LinkId]:
        """Minimal-length directed link path from ``from_node`` to ``to_node``.

        Deterministic: among equal-length paths the lexicographically
        smallest link sequence wins.  Returns ``[]`` when the endpoints
        coincide; raises :class:`NoPathError` when unreachable.
        """
        if from_node not in self.nodes:
            raise NetworkError(f"unknown node {from_node!r}")
        if to_node not in self.nodes:
            raise NetworkError(f"unknown node {to_node!r}")
        if from_node == to_node:
            return []
        heap: list[tuple[float, tuple[LinkId, ...], NodeId]] = [(0.0, (), from_node)]
        settled: set[NodeId] = set()
        while heap:
            dist, path, node = heapq.heappop(heap)
            if node in settled:
                continue
            settled.add(node)
            if node == to_node:
                return list(path)
            for lid, head, length in self._out[node]:
                if head not in settled:
                    heapq.heappush(heap, (dist + length, path + (lid,), head))
        raise NoPathError(from_node, to_node)

    def path_length_m(self, links: list[LinkId] | tuple[LinkId, ...]) -> float:
        return sum(self.links[lid].length_m for lid in links)
