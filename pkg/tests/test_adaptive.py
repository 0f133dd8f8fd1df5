import pytest

from dpmobility.adaptive import select_radius
from dpmobility.errors import SparseNetworkError
from conftest import BASE, grid3x3, make_network, offset_point


def brute_force_final_buffer(net, point, fc, h1, h2, z0=20.0, step=10.0, z_max=5000.0):
    """Independent growth oracle: scan all links at every probed radius."""
    z = z0
    while z <= z_max:
        all_ids = {lid for lid in net.links if net.distance_to_link(point, lid) <= z}
        fc_ids = {lid for lid in all_ids if net.links[lid].functional_class == fc}
        if len(all_ids) > h1 and len(fc_ids) > h2:
            return z, fc_ids
        z += step
    return None, None


class TestSelectRadius:
    def test_zero_thresholds_stop_at_initial_buffer(self):
        net = grid3x3()
        point = net.nodes["n001_001"]
        result = select_radius(net, point, fc=4, h1=0, h2=0)
        assert result.final_buffer_m == 20.0
        assert result.radius_m == 10.0
        assert result.iterations == 1
        assert result.buffer_set_fc
        z, fc_ids = brute_force_final_buffer(net, point, 4, 0, 0)
        assert (z, fc_ids) == (result.final_buffer_m, result.buffer_set_fc)

    def test_dense_grid_growth(self):
        net = grid3x3()
        point = net.nodes["n001_001"]  # 8 incident directed links at distance 0
        result = select_radius(net, point, fc=4, h1=4, h2=4)
        assert result.final_buffer_m == 20.0
        assert len(result.buffer_set_fc) == 8

    def test_growth_matches_oracle_at_varied_points(self, city20):
        for node, h1, h2 in (
            ("n010_010", 8, 3),
            ("n000_000", 8, 3),
            ("n005_010", 12, 6),
            ("n019_019", 20, 8),
        ):
            point = city20.nodes[node]
            fc = 4
            expect_z, expect_fc = brute_force_final_buffer(city20, point, fc, h1, h2)
            result = select_radius(city20, point, fc, h1, h2)
            assert result.final_buffer_m == expect_z
            assert result.buffer_set_fc == frozenset(expect_fc)
            assert result.radius_m == expect_z / 2.0

    def test_interior_node_default_thresholds(self, city20):
        # 8 incident links tie at the 8-link threshold, so the buffer grows
        # until the neighbours' links enter at 100 m.
        result = select_radius(city20, city20.nodes["n010_011"], fc=4)
        assert result.final_buffer_m == 100.0
        assert result.radius_m == 50.0

    def test_sparse_network_error(self):
        net = make_network(
            {"a": (0, 0), "b": (100, 0)},
            [("e1", "a", "b"), ("e2", "b", "a")],
        )
        with pytest.raises(SparseNetworkError):
            select_radius(net, net.nodes["a"], fc=4, h1=2, h2=1, max_buffer_m=500.0)

    def test_wrong_class_is_sparse(self):
        net = grid3x3()
        with pytest.raises(SparseNetworkError):
            select_radius(net, net.nodes["n001_001"], fc=1, h1=0, h2=0, max_buffer_m=400.0)

    def test_monotone_buffer_sets(self, city20):
        point = offset_point(BASE, 430.0, 310.0)
        previous = set()
        for z in (20.0, 50.0, 120.0, 400.0):
            current = city20.links_within(point, z)
            assert previous <= current
            previous = current

    def test_deterministic(self, city20):
        point = city20.nodes["n007_003"]
        a = select_radius(city20, point, fc=4)
        b = select_radius(city20, point, fc=4)
        assert a == b

    def test_sparse_suburb_needs_kilometre_buffer(self):
        # A lone crossroads far from anything else: thresholds above the
        # local link supply push the buffer past a kilometre.
        nodes = {"o": (0, 0), "e": (100, 0), "w": (-100, 0), "n": (0, 100), "s": (0, -100),
                 "far": (2400, 0), "far2": (2500, 0)}
        edges = []
        for i, (a, b) in enumerate((("o", "e"), ("o", "w"), ("o", "n"), ("o", "s"),
                                    ("far", "far2"))):
            edges.append((f"e{i}a", a, b))
            edges.append((f"e{i}b", b, a))
        net = make_network(nodes, edges)
        result = select_radius(net, net.nodes["o"], fc=4, h1=8, h2=8)
        assert result.final_buffer_m > 1000.0

    def test_threshold_validation(self):
        net = grid3x3()
        with pytest.raises(ValueError):
            select_radius(net, net.nodes["n001_001"], fc=4, h1=1, h2=2)
