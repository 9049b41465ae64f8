import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jaysim import city_map as cm
from jaysim.oracles import bellman_ford_costs

GEOM = cm.build_map()
GRAPH = cm.build_nav_graph()


def test_surface_counts():
    assert len(GEOM.roads) == 3
    assert len(GEOM.sidewalks) == 20
    assert len(GEOM.crosswalks) == 6


def test_all_rectangles_within_bounds():
    b = GEOM.bounds
    for r in GEOM.roads + GEOM.sidewalks + GEOM.crosswalks:
        assert b.x0 <= r.x0 <= r.x1 <= b.x1
        assert b.y0 <= r.y0 <= r.y1 <= b.y1


def _touches(a, b, eps=1e-6) -> bool:
    return (
        min(a.x1, b.x1) >= max(a.x0, b.x0) - eps
        and min(a.y1, b.y1) >= max(a.y0, b.y0) - eps
    )


def test_every_crosswalk_overlaps_a_road_and_touches_sidewalk_both_ends():
    for cw in GEOM.crosswalks:
        assert any(
            min(cw.x1, r.x1) > max(cw.x0, r.x0) and min(cw.y1, r.y1) > max(cw.y0, r.y0)
            for r in GEOM.roads
        )
        touching = [s for s in GEOM.sidewalks if _touches(cw, s)]
        if cw.width >= cw.height:  # stripe spans a vertical road: ends at x0 and x1
            assert any(s.x1 <= cw.x0 + 1e-6 for s in touching), cw
            assert any(s.x0 >= cw.x1 - 1e-6 for s in touching), cw
        else:  # spans a horizontal road: ends at y0 and y1
            assert any(s.y1 <= cw.y0 + 1e-6 for s in touching), cw
            assert any(s.y0 >= cw.y1 - 1e-6 for s in touching), cw


def test_build_map_is_pure():
    assert cm.build_map() is GEOM or cm.build_map() == GEOM


def test_node_counts_by_tag():
    assert GRAPH.n_nodes == 40
    assert sum(t == "sidewalk" for t in GRAPH.tags) == 34
    assert sum(t == "crosswalk" for t in GRAPH.tags) == 6


def test_graph_connected_bfs_oracle():
    seen = {0}
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v, _, _ in GRAPH.adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    assert len(seen) == 40


def test_edge_weights_positive_and_symmetric():
    weights = {}
    for u, v, w, _ in GRAPH.edges:
        assert w > 0
        weights[(u, v)] = w
    for u in range(GRAPH.n_nodes):
        for v, w, _ in GRAPH.adjacency[u]:
            assert any(
                math.isclose(w, w2) for k, w2 in weights.items() if k in ((u, v), (v, u))
            )


def test_crossing_flags_exactly_midpoint_edges():
    for u, v, _, crossing in GRAPH.edges:
        touches_midpoint = GRAPH.tags[u] == "crosswalk" or GRAPH.tags[v] == "crosswalk"
        assert crossing == touches_midpoint


def test_sidewalk_waypoints_lie_on_sidewalks():
    for i in range(34):
        assert cm.surface_at(GEOM, GRAPH.nodes[i]) == cm.SurfaceType.SIDEWALK


def test_crosswalk_midpoints_classify_as_crosswalk():
    for i in range(34, 40):
        assert cm.surface_at(GEOM, GRAPH.nodes[i]) == cm.SurfaceType.CROSSWALK


class TestDijkstra:
    def test_identity_path(self):
        assert cm.dijkstra_path(GRAPH, 5, 5) == [5]
        assert cm.path_cost(GRAPH, [5]) == 0.0

    def test_adjacent_pair_is_single_edge(self):
        u, (v, w, _) = 0, GRAPH.adjacency[0][0]
        path = cm.dijkstra_path(GRAPH, u, v)
        assert path == [u, v]
        assert cm.path_cost(GRAPH, path) == pytest.approx(w)

    def test_invalid_ids_rejected(self):
        with pytest.raises(ValueError):
            cm.dijkstra_path(GRAPH, -1, 3)
        with pytest.raises(ValueError):
            cm.dijkstra_path(GRAPH, 0, 40)

    def test_all_pairs_match_bellman_ford_exactly(self):
        for src in range(40):
            ref = bellman_ford_costs(GRAPH, src)
            for dst in range(40):
                cost = cm.path_cost(GRAPH, cm.dijkstra_path(GRAPH, src, dst))
                assert cost == ref[dst], (src, dst)

    @given(st.integers(0, 39), st.integers(0, 39))
    @settings(max_examples=60, deadline=None)
    def test_reversal_symmetry(self, src, dst):
        fwd = cm.path_cost(GRAPH, cm.dijkstra_path(GRAPH, src, dst))
        bwd = cm.path_cost(GRAPH, cm.dijkstra_path(GRAPH, dst, src))
        assert fwd == pytest.approx(bwd, abs=1e-9)

    def test_routing_table_matches_dijkstra(self):
        rt = cm.get_routing()
        for src in (0, 17, 39):
            for dst in range(40):
                assert rt.path(src, dst) == cm.dijkstra_path(GRAPH, src, dst)
                assert rt.cost(src, dst) == cm.path_cost(GRAPH, rt.path(src, dst))


class TestSurfaceClassification:
    def test_outside_bounds_is_offmap(self):
        assert cm.surface_at(GEOM, (-1.0, 50.0)) == cm.SurfaceType.OFFMAP
        assert cm.surface_at(GEOM, (50.0, 121.0)) == cm.SurfaceType.OFFMAP

    def test_crosswalk_center_is_crosswalk(self):
        for cw in GEOM.crosswalks:
            assert cm.surface_at(GEOM, cw.center) == cm.SurfaceType.CROSSWALK

    def test_road_probe_point(self):
        # mid-block on the vertical road, far from crosswalks and sidewalks
        probe = (60.0, 30.0)
        assert all(not cw.contains(*probe) for cw in GEOM.crosswalks)
        assert all(not s.contains(*probe) for s in GEOM.sidewalks)
        assert any(r.contains(*probe) for r in GEOM.roads)
        assert cm.surface_at(GEOM, probe) == cm.SurfaceType.ROAD

    def test_precedence_crosswalk_over_road(self):
        for cw in GEOM.crosswalks:
            c = cw.center
            assert any(r.contains(*c) for r in GEOM.roads)
            assert cm.surface_at(GEOM, c) == cm.SurfaceType.CROSSWALK

    def test_precedence_sidewalk_over_road_on_shared_edge(self):
        # the sidewalk strip east of the vertical road shares the x=64 line
        assert cm.surface_at(GEOM, (64.0, 30.0)) == cm.SurfaceType.SIDEWALK

    @given(st.floats(-5, 125), st.floats(-5, 125))
    @settings(max_examples=300, deadline=None)
    def test_classification_total_and_consistent(self, x, y):
        s = cm.surface_at(GEOM, (x, y))
        assert s in set(cm.SurfaceType)
        batch = cm.classify_points(np.array([x]), np.array([y]))
        assert batch[0] == int(s)


class TestNearestCrosswalk:
    def test_inside_crosswalk_distance_zero(self):
        for k, cw in enumerate(GEOM.crosswalks):
            cid, d = cm.nearest_crosswalk(GEOM, cw.center)
            assert cid == k
            assert d == 0.0

    def test_tie_break_smaller_id(self):
        # (60, 60) sits 4 m from both crosswalks 2 and 3 (and 0 and 1)
        cid, d = cm.nearest_crosswalk(GEOM, (60.0, 60.0))
        assert cid == 0
        assert d == pytest.approx(4.0)

    @given(st.floats(0, 120), st.floats(0, 120))
    @settings(max_examples=200, deadline=None)
    def test_matches_exhaustive_scan(self, x, y):
        cid, d = cm.nearest_crosswalk(GEOM, (x, y))
        dists = [cw.distance(x, y) for cw in GEOM.crosswalks]
        best = min(dists)
        assert d == best
        assert cid == dists.index(best)


def test_json_export_round_trips():
    payload = json.loads(cm.map_to_json())
    assert payload["version"] == cm.MAP_VERSION
    assert len(payload["roads"]) == 3
    assert len(payload["sidewalks"]) == 20
    assert len(payload["crosswalks"]) == 6
    assert len(payload["nodes"]) == 40
    assert len(payload["edges"]) == len(GRAPH.edges)


def test_lane_center_distance_on_lane_is_zero():
    assert cm.lane_center_distance(GEOM, 58.0, 30.0) == 0.0
    assert cm.lane_center_distance(GEOM, 62.0, 30.0) == 0.0
    assert cm.lane_center_distance(GEOM, 30.0, 58.0) == 0.0
    # road centerline sits 2 m from both lane centers
    assert cm.lane_center_distance(GEOM, 60.0, 30.0) == pytest.approx(2.0)
