import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tilekit.documents import (
    ParseError,
    VersionError,
    config_digest,
    graph_to_dict,
    read_solution,
    read_superset,
    read_tileset,
    region_from_dict,
    region_to_dict,
    solution_to_dict,
    write_solution,
    write_superset,
    write_tileset,
)
from tilekit.geom import IDENTITY, Region, make_polygon
from tilekit.graph import build_graph, crop_superset
from tilekit.render import render_svg
from tilekit.solve import Policy, Crop, run_algorithm1
from tilekit.tileset import build_superset


def rect_region(x0, y0, x1, y1):
    return Region(make_polygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)]))


def small_solution(ss):
    region = rect_region(-1.0, -1.0, 2.0, 2.0)
    ps = crop_superset(ss, region)
    crop = Crop(IDENTITY, ps, sum(p.area_norm for p in ps), region)
    sol = run_algorithm1(Policy("random"), crop, ss, np.random.default_rng(0))
    return region, crop, sol


class TestTilesetDocument:
    def test_roundtrip(self, tmp_path, square_domino_ts):
        path = tmp_path / "ts.json"
        write_tileset(square_domino_ts, path)
        loaded = read_tileset(path)
        assert loaded.name == square_domino_ts.name
        assert loaded.num_tile_types == square_domino_ts.num_tile_types
        assert loaded.u == square_domino_ts.u
        for a, b in zip(loaded.prototiles, square_domino_ts.prototiles):
            np.testing.assert_allclose(a.polygon.vertices, b.polygon.vertices)

    def test_invalid_json_names_location(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"name": "x", ')
        with pytest.raises(ParseError, match="line"):
            read_tileset(path)


class TestSupersetCache:
    def test_roundtrip_key_multiset(self, tmp_path, square_domino_superset):
        ss = square_domino_superset
        path = tmp_path / "cache.tsup"
        write_superset(ss, path)
        loaded = read_superset(path, ss.tileset)
        assert sorted(p.key for p in loaded.placements) == \
            sorted(p.key for p in ss.placements)
        assert loaded.pose_table == ss.pose_table
        assert loaded.rings == ss.rings

    def test_corrupted_header_names_offset(self, tmp_path, square_superset):
        path = tmp_path / "cache.tsup"
        write_superset(square_superset, path)
        raw = bytearray(path.read_bytes())
        path.write_bytes(bytes(raw[:10]))
        with pytest.raises(ParseError, match="offset"):
            read_superset(path, square_superset.tileset)

    def test_bad_magic(self, tmp_path, square_superset):
        path = tmp_path / "cache.tsup"
        path.write_bytes(b"XXXX" + b"\x00" * 40)
        with pytest.raises(ParseError, match="magic"):
            read_superset(path, square_superset.tileset)

    def test_future_version_rejected(self, tmp_path, square_superset):
        path = tmp_path / "cache.tsup"
        write_superset(square_superset, path)
        raw = bytearray(path.read_bytes())
        raw[4:8] = (99).to_bytes(4, "little")
        path.write_bytes(bytes(raw))
        with pytest.raises(VersionError):
            read_superset(path, square_superset.tileset)

    def test_wrong_tileset_rejected(self, tmp_path, square_superset,
                                    domino_ts):
        path = tmp_path / "cache.tsup"
        write_superset(square_superset, path)
        with pytest.raises(ParseError, match="tile set"):
            read_superset(path, domino_ts)


class TestSolutionDocument:
    def test_roundtrip(self, tmp_path, square_domino_superset):
        ss = square_domino_superset
        region, crop, sol = small_solution(ss)
        doc = solution_to_dict(sol, ss.tileset, region, seed=7,
                               config={"runs": 1})
        path = tmp_path / "sol.json"
        write_solution(doc, path)
        loaded = read_solution(path)
        assert loaded == doc
        restored = region_from_dict(loaded["region"])
        np.testing.assert_allclose(restored.outer.vertices,
                                   region.outer.vertices)

    def test_missing_field_rejected(self, tmp_path):
        path = tmp_path / "sol.json"
        path.write_text(json.dumps({"version": 1, "tiles": []}))
        with pytest.raises(ParseError, match="missing required field"):
            read_solution(path)

    def test_future_version_rejected(self, tmp_path):
        path = tmp_path / "sol.json"
        path.write_text(json.dumps({"version": 2}))
        with pytest.raises(VersionError):
            read_solution(path)

    def test_digest_stable(self):
        a = config_digest({"b": 1, "a": [1, 2]})
        b = config_digest({"a": [1, 2], "b": 1})
        assert a == b


class TestGraphDocument:
    def test_graph_export_fields(self, square_superset):
        region = rect_region(0.0, 0.0, 3.0, 1.0)
        g = build_graph(crop_superset(square_superset, region),
                        square_superset)
        doc = graph_to_dict(g)
        assert len(doc["nodes"]) == len(g)
        assert len(doc["neighbor_edges"]) == len(g.neighbor_edges)
        assert len(doc["node_features"]) == len(g)
        assert doc["l_max"] == g.l_max
        json.dumps(doc)  # serializable


class TestRegionDocument:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.5, 5.0), st.floats(0.5, 5.0))
    def test_rect_region_roundtrip(self, seed, w, h):
        region = rect_region(0.0, 0.0, w, h)
        restored = region_from_dict(region_to_dict(region))
        np.testing.assert_allclose(restored.outer.vertices,
                                   region.outer.vertices)

    def test_region_with_hole_roundtrip(self):
        region = Region(
            make_polygon([(0, 0), (5, 0), (5, 5), (0, 5)]),
            [make_polygon([(2, 2), (3, 2), (3, 3), (2, 3)])])
        restored = region_from_dict(region_to_dict(region))
        assert len(restored.holes) == 1
        assert restored.shapely.area == pytest.approx(24.0)


class TestSvg:
    def test_deterministic_bytes(self, square_domino_superset):
        ss = square_domino_superset
        region, crop, sol = small_solution(ss)
        a = render_svg(sol.placements, crop.placements, region, ss.tileset)
        b = render_svg(sol.placements, crop.placements, region, ss.tileset)
        assert a == b

    def test_layer_structure(self, square_domino_superset):
        ss = square_domino_superset
        region, crop, sol = small_solution(ss)
        svg = render_svg(sol.placements, crop.placements, region, ss.tileset)
        assert svg.startswith("<svg")
        paths = [line for line in svg.splitlines() if line.startswith("<path")]
        # gray region first, blue candidates second, then one path per tile
        assert "#d4d4d4" in paths[0]
        assert "#a6c8e4" in paths[1]
        assert len(paths) == 2 + len(sol.placements)

    def test_empty_solution_underlays_only(self, square_domino_superset):
        ss = square_domino_superset
        region, crop, _ = small_solution(ss)
        svg = render_svg([], crop.placements, region, ss.tileset)
        paths = [line for line in svg.splitlines() if line.startswith("<path")]
        assert len(paths) == 2

    def test_valid_xml(self, square_domino_superset):
        import xml.etree.ElementTree as ET
        ss = square_domino_superset
        region, crop, sol = small_solution(ss)
        svg = render_svg(sol.placements, crop.placements, region, ss.tileset)
        ET.fromstring(svg)


class TestGraphRoundTrip:
    def test_read_back_equal_fields(self, tmp_path, square_domino_superset):
        from tilekit.documents import read_graph, write_graph
        ss = square_domino_superset
        region = rect_region(-1.5, -1.5, 2.5, 2.5)
        g = build_graph(crop_superset(ss, region), ss)
        path = tmp_path / "graph.json"
        write_graph(g, path)
        back = read_graph(path, ss.tileset)
        assert [p.key for p in back.nodes] == [p.key for p in g.nodes]
        np.testing.assert_array_equal(back.overlap_edges, g.overlap_edges)
        np.testing.assert_array_equal(back.neighbor_edges, g.neighbor_edges)
        np.testing.assert_array_equal(back.node_features, g.node_features)
        np.testing.assert_array_equal(back.edge_features, g.edge_features)
        np.testing.assert_allclose(back.contact_lengths, g.contact_lengths)
        assert back.l_max == g.l_max and back.num_poses == g.num_poses
