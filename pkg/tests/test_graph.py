import math

import numpy as np
import pytest

from tilekit.geom import IDENTITY, Region, RigidTransform, make_polygon
from tilekit.graph import (
    EmptyGraph,
    bruteforce_pairs,
    build_graph,
    crop_superset,
    mean_degree,
)


def rect(x0, y0, x1, y1):
    return make_polygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])


def placements_at(ss, coords, proto=0):
    ts = ss.tileset
    out = []
    for x, y in coords:
        p = ts.place(proto, RigidTransform(0.0, (x, y)))
        out.append(ss.placements[ss.key_index[p.key]])
    return out


class TestCropSuperset:
    def test_full_hull_keeps_everything(self, square_superset):
        x0, y0, x1, y1 = square_superset.bounds()
        region = Region(rect(x0 - 1, y0 - 1, x1 + 1, y1 + 1))
        got = crop_superset(square_superset, region)
        assert len(got) == len(square_superset)

    def test_tiny_region_empty(self, square_superset):
        region = Region(rect(0.2, 0.2, 0.6, 0.6))
        assert crop_superset(square_superset, region) == []

    def test_aligned_two_by_one(self, square_superset):
        region = Region(rect(0.0, 0.0, 2.0, 1.0))
        got = crop_superset(square_superset, region)
        assert len(got) == 2

    def test_pose_shifts_crop(self, square_superset):
        region = Region(rect(0.0, 0.0, 2.0, 1.0))
        posed = crop_superset(square_superset, region,
                              RigidTransform(0.0, (0.5, 0.0)))
        assert len(posed) == 1  # only the square at x=1 fits [0.5, 2.5]


class TestBuildGraph:
    def test_two_side_by_side_squares(self, square_superset):
        ps = placements_at(square_superset, [(0, 0), (1, 0)])
        g = build_graph(ps, square_superset)
        assert len(g.neighbor_edges) == 1
        assert len(g.overlap_edges) == 0
        assert g.edge_features[0, 0] == pytest.approx(0.25)  # 1 / perimeter 4

    def test_overlapping_squares(self, square_domino_superset):
        ss = square_domino_superset
        ts = ss.tileset
        sq = ts.place(0, IDENTITY)
        dom = ts.place(1, IDENTITY)
        a = ss.placements[ss.key_index[sq.key]]
        b = ss.placements[ss.key_index[dom.key]]
        g = build_graph([a, b], ss)
        assert len(g.overlap_edges) == 1
        assert len(g.neighbor_edges) == 0

    def test_three_collinear_squares(self, square_superset):
        ps = placements_at(square_superset, [(0, 0), (1, 0), (2, 0)])
        g = build_graph(ps, square_superset)
        assert len(g.neighbor_edges) == 2
        assert len(g.overlap_edges) == 0

    def test_features_in_unit_range_onehot_sums(self, square_domino_superset):
        ss = square_domino_superset
        region = Region(rect(-2.0, -2.0, 3.0, 3.0))
        g = build_graph(crop_superset(ss, region), ss)
        assert np.all(g.node_features >= 0) and np.all(g.node_features <= 1)
        assert np.all(g.edge_features >= 0) and np.all(g.edge_features <= 1)
        np.testing.assert_array_equal(g.node_features[:, 1:].sum(axis=1), 1.0)
        np.testing.assert_array_equal(g.edge_features[:, 1:].sum(axis=1), 1.0)

    def test_hash_matches_bruteforce(self, square_domino_superset):
        ss = square_domino_superset
        region = Region(rect(-2.0, -2.0, 3.0, 3.0))
        ps = crop_superset(ss, region)
        assert 10 < len(ps) <= 200
        g_fast = build_graph(ps, ss, use_spatial_hash=True)
        g_slow = build_graph(ps, ss, use_spatial_hash=False)
        np.testing.assert_array_equal(g_fast.overlap_edges, g_slow.overlap_edges)
        np.testing.assert_array_equal(g_fast.neighbor_edges, g_slow.neighbor_edges)
        np.testing.assert_array_equal(g_fast.edge_features, g_slow.edge_features)

    def test_no_self_edges_and_disjoint_edge_sets(self, square_domino_superset):
        ss = square_domino_superset
        region = Region(rect(-2.0, -2.0, 3.0, 3.0))
        g = build_graph(crop_superset(ss, region), ss)
        for edges in (g.overlap_edges, g.neighbor_edges):
            assert np.all(edges[:, 0] != edges[:, 1])
        ovl = {tuple(e) for e in g.overlap_edges}
        nbr = {tuple(e) for e in g.neighbor_edges}
        assert not (ovl & nbr)

    def test_permutation_stability(self, square_domino_superset):
        ss = square_domino_superset
        region = Region(rect(-1.0, -1.0, 2.0, 2.0))
        ps = crop_superset(ss, region)
        rng = np.random.default_rng(4)
        shuffled = [ps[i] for i in rng.permutation(len(ps))]
        g1 = build_graph(ps, ss)
        g2 = build_graph(shuffled, ss)
        assert [p.key for p in g1.nodes] == [p.key for p in g2.nodes]
        np.testing.assert_array_equal(g1.neighbor_edges, g2.neighbor_edges)
        np.testing.assert_array_equal(g1.node_features, g2.node_features)


class TestSubgraph:
    def test_subgraph_reindexes(self, square_superset):
        ps = placements_at(square_superset, [(0, 0), (1, 0), (2, 0)])
        g = build_graph(ps, square_superset)
        sub = g.subgraph(np.array([0, 2]))
        assert len(sub) == 2
        # middle node removed: the two survivors are not adjacent
        assert len(sub.neighbor_edges) in (0, 1)
        keep_keys = {g.nodes[0].key, g.nodes[2].key}
        assert {n.key for n in sub.nodes} == keep_keys

    def test_subgraph_keeps_adjacent_pair(self, square_superset):
        ps = placements_at(square_superset, [(0, 0), (1, 0), (2, 2)])
        g = build_graph(ps, square_superset)
        nbr = g.neighbor_edges
        assert len(nbr) == 1
        keep = sorted({int(nbr[0, 0]), int(nbr[0, 1])})
        sub = g.subgraph(np.array(keep))
        assert len(sub.neighbor_edges) == 1
        assert sub.contact_lengths[0] == pytest.approx(1.0)


class TestMeanDegree:
    def test_two_squares(self, square_superset):
        ps = placements_at(square_superset, [(0, 0), (1, 0)])
        assert mean_degree(build_graph(ps, square_superset)) == pytest.approx(1.0)

    def test_single_node(self, square_superset):
        ps = placements_at(square_superset, [(0, 0)])
        assert mean_degree(build_graph(ps, square_superset)) == 0.0

    def test_path_of_three(self, square_superset):
        ps = placements_at(square_superset, [(0, 0), (1, 0), (2, 0)])
        assert mean_degree(build_graph(ps, square_superset)) == pytest.approx(4 / 3)

    def test_empty_graph_raises(self, square_superset):
        g = build_graph([], square_superset)
        with pytest.raises(EmptyGraph):
            mean_degree(g)


def test_pose_table_incomplete_raises(square_superset):
    from tilekit.tileset import PoseTableIncomplete, Superset
    ss = square_superset
    hollow = Superset(ss.tileset, ss.placements, ss.rings, pose_table=[])
    ps = [ss.placements[ss.key_index[k]] for k in list(ss.key_index)[:8]]
    with pytest.raises(PoseTableIncomplete):
        build_graph(ps, hollow)
