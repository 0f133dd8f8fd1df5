import itertools

import numpy as np
import pytest

from dpmobility.errors import NetworkError, NoCandidateError, NoPathError
from dpmobility.geometry import GeoPoint
from dpmobility.network import Link, RoadNetwork

from conftest import BASE, grid3x3, make_network, offset_point


def brute_force_within(net: RoadNetwork, center: GeoPoint, radius: float) -> set[str]:
    return {lid for lid in net.links if net.distance_to_link(center, lid) <= radius}


def random_network(rng: np.random.Generator, n_nodes: int, base: GeoPoint,
                   span_m: float = 2000.0) -> RoadNetwork:
    nodes_m = {
        f"n{i}": (float(rng.uniform(0, span_m)), float(rng.uniform(0, span_m)))
        for i in range(n_nodes)
    }
    edges = []
    k = 0
    for a, b in itertools.combinations(sorted(nodes_m), 2):
        if rng.random() < 0.4:
            edges.append((f"e{k:03d}", a, b, {"fc": int(rng.integers(1, 6))}))
            k += 1
            if rng.random() < 0.7:
                edges.append((f"e{k:03d}", b, a, {"fc": int(rng.integers(1, 6))}))
                k += 1
    if not edges:
        names = sorted(nodes_m)
        edges.append(("e000", names[0], names[1]))
    return make_network(nodes_m, edges, base)


class TestValidation:
    def test_unknown_endpoint(self):
        p = GeoPoint(0, 0)
        link = Link("L", "a", "missing", (p, GeoPoint(0, 0.001)), 111.0, 4, 10.0)
        with pytest.raises(NetworkError):
            RoadNetwork({"a": p}, {"L": link})

    def test_length_shorter_than_geometry(self):
        a, b = GeoPoint(0, 0), GeoPoint(0, 0.01)  # ~1112 m apart
        link = Link("L", "a", "b", (a, b), 500.0, 4, 10.0)
        with pytest.raises(NetworkError):
            RoadNetwork({"a": a, "b": b}, {"L": link})

    def test_bad_functional_class(self):
        a, b = GeoPoint(0, 0), GeoPoint(0, 0.001)
        link = Link("L", "a", "b", (a, b), 120.0, 6, 10.0)
        with pytest.raises(NetworkError):
            RoadNetwork({"a": a, "b": b}, {"L": link})

    def test_adjacency_consistent(self):
        net = grid3x3()
        for nid, out in net.adjacency.items():
            for lid in out:
                assert net.links[lid].from_node == nid
        assert sum(len(v) for v in net.adjacency.values()) == len(net.links)


class TestLinksWithin:
    def test_radius_zero_off_links(self):
        net = grid3x3()
        p = offset_point(BASE, 37.0, 41.0)  # mid-block, off every link
        assert net.links_within(p, 0.0) == set()

    def test_center_node_radius_60(self):
        net = grid3x3()
        center = net.nodes["n001_001"]
        got = net.links_within(center, 60.0)
        assert got == brute_force_within(net, center, 60.0)
        assert len(got) == 8  # the incident directed links only

    def test_network_diameter_returns_everything(self):
        net = grid3x3()
        assert net.links_within(net.nodes["n001_001"], 10_000.0) == set(net.links)

    def test_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            grid3x3().links_within(BASE, -1.0)

    def test_fc_filter(self):
        nodes = {"a": (0, 0), "b": (100, 0), "c": (0, 100)}
        net = make_network(
            nodes,
            [("e1", "a", "b", {"fc": 2}), ("e2", "a", "c", {"fc": 4})],
        )
        center = net.nodes["a"]
        assert net.links_within_fc(center, 50.0, 2) == {"e1"}
        assert net.links_within_fc(center, 50.0, 4) == {"e2"}
        assert net.links_within_fc(center, 50.0, 3) == set()
        assert net.links_within_fc(center, 50.0, 4) | net.links_within_fc(center, 50.0, 2) == \
            net.links_within(center, 50.0)

    def test_index_matches_brute_force_on_random_networks(self):
        for seed, lat in ((1, 0.0), (2, 37.8), (3, 60.0)):
            rng = np.random.default_rng(seed)
            net = random_network(rng, 14, GeoPoint(lat, 11.0))
            for _ in range(150):
                center = offset_point(
                    GeoPoint(lat, 11.0),
                    float(rng.uniform(-200, 2200)),
                    float(rng.uniform(-200, 2200)),
                )
                radius = float(rng.uniform(0, 1500))
                assert net.links_within(center, radius) == \
                    brute_force_within(net, center, radius)


class TestNearestLink:
    def test_point_on_link(self):
        net = grid3x3()
        mid = offset_point(BASE, 50.0, 0.0)  # on n000_000>n000_001
        lid = net.nearest_link(mid)
        assert net.distance_to_link(mid, lid) == pytest.approx(0.0, abs=1e-6)

    def test_tie_breaks_by_link_id(self):
        # Two links sharing one geometry produce bit-identical distances,
        # so the id decides.
        nodes = {"a": (0, 0), "b": (100, 0)}
        net = make_network(nodes, [("m2", "a", "b"), ("m1", "a", "b")])
        p = offset_point(BASE, 50.0, 30.0)
        assert net.nearest_link(p) == "m1"
        assert net.nearest_link(p, {"m2", "m1"}) == "m1"

    def test_candidate_restriction(self):
        net = grid3x3()
        mid = offset_point(BASE, 50.0, 0.0)
        far = "n002_001>n002_002"
        assert net.nearest_link(mid, {far}) == far

    def test_empty_candidates(self):
        with pytest.raises(NoCandidateError):
            grid3x3().nearest_link(BASE, set())

    def test_matches_brute_force(self):
        rng = np.random.default_rng(9)
        net = random_network(rng, 12, GeoPoint(37.8, 11.0))
        for _ in range(100):
            p = offset_point(GeoPoint(37.8, 11.0),
                             float(rng.uniform(-500, 2500)), float(rng.uniform(-500, 2500)))
            expected = min(net.links, key=lambda lid: (net.distance_to_link(p, lid), lid))
            assert net.nearest_link(p) == expected


class TestNearestNode:
    def test_within_radius(self):
        net = grid3x3()
        p = offset_point(BASE, 10.0, 5.0)
        assert net.nearest_node(p, within=20.0) == "n000_000"
        assert net.nearest_node(p, within=5.0) is None

    def test_unbounded(self):
        net = grid3x3()
        p = offset_point(BASE, 220.0, 190.0)
        assert net.nearest_node(p) == "n002_002"


def enumerate_simple_paths(net: RoadNetwork, src: str, dst: str) -> list[list[str]]:
    """All simple directed link paths src -> dst, for the oracle."""
    paths = []

    def walk(node, seen, acc):
        if node == dst:
            paths.append(list(acc))
            return
        for lid in net.adjacency[node]:
            head = net.links[lid].to_node
            if head not in seen:
                seen.add(head)
                acc.append(lid)
                walk(head, seen, acc)
                acc.pop()
                seen.remove(head)

    walk(src, {src}, [])
    return paths


class TestShortestPath:
    def test_same_node(self):
        net = grid3x3()
        assert net.shortest_path("n001_001", "n001_001") == []

    def test_two_node_network(self):
        net = make_network({"a": (0, 0), "b": (100, 0)}, [("e1", "a", "b")])
        assert net.shortest_path("a", "b") == ["e1"]

    def test_grid_corner_to_corner_manhattan(self):
        net = grid3x3()
        path = net.shortest_path("n000_000", "n002_002")
        assert net.path_length_m(path) == pytest.approx(400.0)
        assert len(path) == 4

    def test_no_path(self):
        net = make_network({"a": (0, 0), "b": (100, 0)}, [("e1", "a", "b")])
        with pytest.raises(NoPathError):
            net.shortest_path("b", "a")

    def test_unknown_node(self):
        with pytest.raises(NetworkError):
            grid3x3().shortest_path("nope", "n000_000")

    def test_matches_exhaustive_enumeration(self):
        for seed in range(6):
            rng = np.random.default_rng(100 + seed)
            net = random_network(rng, 7, GeoPoint(37.8, 11.0), span_m=1000.0)
            nodes = sorted(net.nodes)
            for src, dst in itertools.permutations(nodes, 2):
                all_paths = enumerate_simple_paths(net, src, dst)
                if not all_paths:
                    with pytest.raises(NoPathError):
                        net.shortest_path(src, dst)
                    continue
                got = net.shortest_path(src, dst)
                got_len = net.path_length_m(got)
                best = min(net.path_length_m(p) for p in all_paths)
                assert got_len == pytest.approx(best, rel=1e-12)

    def test_deterministic_lexicographic_tie_break(self):
        # Two equal-length routes a->d; the lexicographically smaller link
        # sequence must win.
        nodes = {"a": (0, 0), "b": (100, 0), "c": (0, 100), "d": (100, 100)}
        net = make_network(
            nodes,
            [
                ("e1", "a", "b", {"length_m": 100.0}),
                ("e2", "b", "d", {"length_m": 100.0}),
                ("e3", "a", "c", {"length_m": 100.0}),
                ("e4", "c", "d", {"length_m": 100.0}),
            ],
        )
        assert net.shortest_path("a", "d") == ["e1", "e2"]

    def test_subpath_consistency_on_grid(self, city20):
        # A recovered sub-leg of a chosen route equals that route's slice.
        route = city20.shortest_path("n002_003", "n014_011")
        nodes = ["n002_003"] + [city20.links[lid].to_node for lid in route]
        i, j = 3, 9
        sub = city20.shortest_path(nodes[i], nodes[j])
        assert sub == route[i:j]
