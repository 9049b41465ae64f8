"""Fixed 120x120 m urban map: surface rectangles, the 40-node walking graph,
and shortest-path routing for pedestrians.

The layout is frozen (version tag below) so episode logs stay comparable
across runs: a four-way intersection at (60, 60) where a vertical road
crosses a horizontal road, and a T-junction at (60, 90) where a second
horizontal road joins the vertical road from the east.  Road width 8 m
(two 4 m lanes), sidewalk width 3 m, crosswalk width 4 m.
"""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache

import numpy as np

MAP_VERSION = "intersection-v1"
MAP_SIZE = 120.0
HALF_EXTENT = 60.0
ROAD_WIDTH = 8.0
LANE_OFFSET = 2.0  # lane centers sit 2 m either side of the road centerline


@dataclass(frozen=True, slots=True)
class Rect:
    """Axis-aligned rectangle with closed bounds, in meters."""

    x0: float
    y0: float
    x1: float
    y1: float

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def distance(self, x: float, y: float) -> float:
        dx = max(self.x0 - x, 0.0, x - self.x1)
        dy = max(self.y0 - y, 0.0, y - self.y1)
        return math.hypot(dx, dy)

    def clamp(self, x: float, y: float) -> tuple[float, float]:
        return (min(max(x, self.x0), self.x1), min(max(y, self.y0), self.y1))

    def inflate(self, m: float) -> "Rect":
        return Rect(self.x0 - m, self.y0 - m, self.x1 + m, self.y1 + m)

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0


class SurfaceType(IntEnum):
    ROAD = 0
    SIDEWALK = 1
    CROSSWALK = 2
    OFFMAP = 3


@dataclass(frozen=True, slots=True)
class MapGeometry:
    roads: tuple[Rect, ...]
    sidewalks: tuple[Rect, ...]
    crosswalks: tuple[Rect, ...]
    bounds: Rect
    version: str


# Road rectangles. R0 is the vertical through road; R1 the horizontal through
# road (four-way at their crossing); R2 joins R0 from the east (T-junction).
_ROADS = (
    Rect(56.0, 0.0, 64.0, 120.0),
    Rect(0.0, 56.0, 120.0, 64.0),
    Rect(56.0, 86.0, 120.0, 94.0),
)

# 20 sidewalk strips: flanking each road arm plus a perimeter loop, broken
# wherever a road cuts through.
_SIDEWALKS = (
    Rect(53.0, 0.0, 56.0, 56.0),      # 0  west of R0, south of R1
    Rect(53.0, 64.0, 56.0, 120.0),    # 1  west of R0, north of R1
    Rect(64.0, 0.0, 67.0, 56.0),      # 2  east of R0, south of R1
    Rect(64.0, 64.0, 67.0, 86.0),     # 3  east of R0, between R1 and R2
    Rect(64.0, 94.0, 67.0, 120.0),    # 4  east of R0, north of R2
    Rect(0.0, 53.0, 53.0, 56.0),      # 5  south of R1, west arm
    Rect(67.0, 53.0, 120.0, 56.0),    # 6  south of R1, east arm
    Rect(0.0, 64.0, 53.0, 67.0),      # 7  north of R1, west arm
    Rect(67.0, 64.0, 120.0, 67.0),    # 8  north of R1, east arm
    Rect(67.0, 83.0, 120.0, 86.0),    # 9  south of R2
    Rect(67.0, 94.0, 120.0, 97.0),    # 10 north of R2
    Rect(0.0, 0.0, 3.0, 56.0),        # 11 west perimeter, south
    Rect(0.0, 64.0, 3.0, 120.0),      # 12 west perimeter, north
    Rect(117.0, 0.0, 120.0, 56.0),    # 13 east perimeter, south
    Rect(117.0, 64.0, 120.0, 86.0),   # 14 east perimeter, middle
    Rect(117.0, 94.0, 120.0, 120.0),  # 15 east perimeter, north
    Rect(3.0, 0.0, 56.0, 3.0),        # 16 south perimeter, west
    Rect(64.0, 0.0, 117.0, 3.0),      # 17 south perimeter, east
    Rect(3.0, 117.0, 56.0, 120.0),    # 18 north perimeter, west
    Rect(64.0, 117.0, 117.0, 120.0),  # 19 north perimeter, east
)

# Crosswalks 0-3 ring the four-way intersection; 4-5 serve the T-junction.
_CROSSWALKS = (
    Rect(56.0, 64.0, 64.0, 68.0),   # 0 across R0, north of the four-way
    Rect(56.0, 52.0, 64.0, 56.0),   # 1 across R0, south of the four-way
    Rect(52.0, 56.0, 56.0, 64.0),   # 2 across R1, west of the four-way
    Rect(64.0, 56.0, 68.0, 64.0),   # 3 across R1, east of the four-way
    Rect(64.0, 86.0, 68.0, 94.0),   # 4 across R2, east of the T-junction
    Rect(56.0, 82.0, 64.0, 86.0),   # 5 across R0, south of the T-junction
)

_BOUNDS = Rect(0.0, 0.0, MAP_SIZE, MAP_SIZE)


@lru_cache(maxsize=1)
def build_map() -> MapGeometry:
    """Return the fixed map. Pure: every call yields the identical object."""
    return MapGeometry(_ROADS, _SIDEWALKS, _CROSSWALKS, _BOUNDS, MAP_VERSION)


def surface_at(geom: MapGeometry, point: tuple[float, float]) -> SurfaceType:
    """Classify a point with precedence Crosswalk > Sidewalk > Road > OffMap."""
    x, y = point
    for r in geom.crosswalks:
        if r.contains(x, y):
            return SurfaceType.CROSSWALK
    for r in geom.sidewalks:
        if r.contains(x, y):
            return SurfaceType.SIDEWALK
    for r in geom.roads:
        if r.contains(x, y):
            return SurfaceType.ROAD
    return SurfaceType.OFFMAP


def _rect_array(rects: tuple[Rect, ...]) -> np.ndarray:
    return np.array([[r.x0, r.y0, r.x1, r.y1] for r in rects])


_ROAD_ARR = _rect_array(_ROADS)
_SIDEWALK_ARR = _rect_array(_SIDEWALKS)
_CROSSWALK_ARR = _rect_array(_CROSSWALKS)


def _in_any(arr: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    x = xs[..., None]
    y = ys[..., None]
    inside = (x >= arr[:, 0]) & (x <= arr[:, 2]) & (y >= arr[:, 1]) & (y <= arr[:, 3])
    return inside.any(axis=-1)


def classify_points(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized surface_at over the fixed map; returns SurfaceType codes."""
    out = np.full(np.shape(xs), int(SurfaceType.OFFMAP), dtype=np.int8)
    out[_in_any(_ROAD_ARR, xs, ys)] = int(SurfaceType.ROAD)
    out[_in_any(_SIDEWALK_ARR, xs, ys)] = int(SurfaceType.SIDEWALK)
    out[_in_any(_CROSSWALK_ARR, xs, ys)] = int(SurfaceType.CROSSWALK)
    return out


def nearest_crosswalk(geom: MapGeometry, point: tuple[float, float]) -> tuple[int, float]:
    """Id and distance of the closest crosswalk rectangle; ties pick the smaller id."""
    x, y = point
    best_id, best_d = 0, geom.crosswalks[0].distance(x, y)
    for i in range(1, len(geom.crosswalks)):
        d = geom.crosswalks[i].distance(x, y)
        if d < best_d:
            best_id, best_d = i, d
    return best_id, best_d


def lane_center_distance(geom: MapGeometry, x: float, y: float) -> float:
    """Distance to the nearest lane-center line segment over all roads."""
    best = math.inf
    for r in geom.roads:
        if r.width >= r.height:  # horizontal road: lanes are y = cy +/- 2
            cy = (r.y0 + r.y1) / 2.0
            dx = max(r.x0 - x, 0.0, x - r.x1)
            for ly in (cy - LANE_OFFSET, cy + LANE_OFFSET):
                d = math.hypot(dx, y - ly)
                if d < best:
                    best = d
        else:
            cx = (r.x0 + r.x1) / 2.0
            dy = max(r.y0 - y, 0.0, y - r.y1)
            for lx in (cx - LANE_OFFSET, cx + LANE_OFFSET):
                d = math.hypot(x - lx, dy)
                if d < best:
                    best = d
    return best


# --- navigation graph -------------------------------------------------------

# 34 sidewalk waypoints, grouped by walkable region. Positions sit on sidewalk
# centerlines; corner nodes are shared by two strips. The split across the 20
# strips is a frozen design choice (roughly one node per 25 m of strip).
_SIDEWALK_WAYPOINTS = (
    # southwest block
    (1.5, 1.5), (28.0, 1.5), (54.5, 1.5),
    (1.5, 54.5), (28.0, 54.5), (54.5, 54.5),
    # southeast block
    (65.5, 1.5), (92.0, 1.5), (118.5, 1.5),
    (118.5, 28.0), (65.5, 54.5), (92.0, 54.5), (118.5, 54.5),
    # northwest block
    (1.5, 65.5), (28.0, 65.5), (54.5, 65.5),
    (1.5, 92.0), (1.5, 118.5), (28.0, 118.5), (54.5, 118.5),
    (54.5, 84.5), (54.5, 101.0),
    # east-middle block (between the two horizontal roads)
    (65.5, 65.5), (92.0, 65.5), (118.5, 65.5),
    (65.5, 84.5), (92.0, 84.5), (118.5, 84.5),
    # northeast block
    (65.5, 95.5), (92.0, 95.5), (118.5, 95.5),
    (65.5, 118.5), (92.0, 118.5), (118.5, 118.5),
)

N_SIDEWALK_NODES = 34
N_CROSSWALK_NODES = 6
N_NODES = N_SIDEWALK_NODES + N_CROSSWALK_NODES

# Sidewalk-to-sidewalk links following the strips (never crossing a road).
_SIDEWALK_EDGES = (
    # southwest
    (0, 1), (1, 2), (0, 3), (3, 4), (4, 5), (2, 5),
    # southeast
    (6, 7), (7, 8), (8, 9), (9, 12), (10, 11), (11, 12), (6, 10),
    # northwest
    (13, 14), (14, 15), (13, 16), (16, 17), (17, 18), (18, 19),
    (15, 20), (20, 21), (21, 19),
    # east-middle
    (22, 23), (23, 24), (22, 25), (25, 26), (26, 27), (24, 27),
    # northeast
    (28, 29), (29, 30), (28, 31), (31, 32), (32, 33), (30, 33),
)

# Each crosswalk midpoint links its two flanking corner waypoints.
_CROSSWALK_FLANKS = (
    (15, 22),  # crosswalk 0
    (5, 10),   # crosswalk 1
    (5, 15),   # crosswalk 2
    (10, 22),  # crosswalk 3
    (25, 28),  # crosswalk 4
    (20, 25),  # crosswalk 5
)


@dataclass(frozen=True, slots=True)
class NavGraph:
    nodes: tuple[tuple[float, float], ...]
    tags: tuple[str, ...]  # "sidewalk" | "crosswalk"
    edges: tuple[tuple[int, int, float, bool], ...]  # (u, v, weight, crossing)
    adjacency: tuple[tuple[tuple[int, float, bool], ...], ...]
    crossing_nodes: frozenset[int]

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)


def _segment_hits_rect(p: tuple[float, float], q: tuple[float, float], r: Rect) -> bool:
    """Closed segment/rectangle intersection via slab clipping."""
    t0, t1 = 0.0, 1.0
    dx, dy = q[0] - p[0], q[1] - p[1]
    for pos, d, lo, hi in ((p[0], dx, r.x0, r.x1), (p[1], dy, r.y0, r.y1)):
        if d == 0.0:
            if pos < lo or pos > hi:
                return False
        else:
            a, b = (lo - pos) / d, (hi - pos) / d
            if a > b:
                a, b = b, a
            t0, t1 = max(t0, a), min(t1, b)
            if t0 > t1:
                return False
    return True


@lru_cache(maxsize=1)
def build_nav_graph(geom: MapGeometry | None = None) -> NavGraph:
    """Construct the fixed 40-node graph (34 sidewalk waypoints + 6 crosswalk
    midpoints) and verify it is connected."""
    geom = geom or build_map()
    nodes = list(_SIDEWALK_WAYPOINTS)
    tags = ["sidewalk"] * N_SIDEWALK_NODES
    for cw in geom.crosswalks:
        nodes.append(cw.center)
        tags.append("crosswalk")

    raw_edges: list[tuple[int, int]] = list(_SIDEWALK_EDGES)
    for k, (a, b) in enumerate(_CROSSWALK_FLANKS):
        m = N_SIDEWALK_NODES + k
        raw_edges.append((a, m))
        raw_edges.append((m, b))

    edges = []
    adjacency: list[list[tuple[int, float, bool]]] = [[] for _ in nodes]
    for u, v in raw_edges:
        w = math.hypot(nodes[u][0] - nodes[v][0], nodes[u][1] - nodes[v][1])
        crossing = (
            tags[u] == "crosswalk"
            or tags[v] == "crosswalk"
            or any(_segment_hits_rect(nodes[u], nodes[v], r) for r in geom.roads)
        )
        edges.append((u, v, w, crossing))
        adjacency[u].append((v, w, crossing))
        adjacency[v].append((u, w, crossing))

    # deterministic neighbor order
    for lst in adjacency:
        lst.sort()

    graph = NavGraph(
        nodes=tuple(nodes),
        tags=tuple(tags),
        edges=tuple(edges),
        adjacency=tuple(tuple(lst) for lst in adjacency),
        crossing_nodes=frozenset(range(N_SIDEWALK_NODES, N_NODES)),
    )

    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v, _, _ in graph.adjacency[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    if len(seen) != graph.n_nodes:
        raise RuntimeError(f"navigation graph is disconnected: reached {len(seen)}/{graph.n_nodes}")
    return graph


def _dijkstra_full(graph: NavGraph, src: int) -> tuple[list[float], list[int]]:
    """Distances and predecessors from src. At equal tentative distance the
    smaller predecessor id wins, which makes paths deterministic."""
    n = graph.n_nodes
    dist = [math.inf] * n
    pred = [-1] * n
    dist[src] = 0.0
    heap = [(0.0, src)]
    done = [False] * n
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, w, _ in graph.adjacency[u]:
            nd = d + w
            if nd < dist[v] or (nd == dist[v] and pred[v] > u):
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, pred


def dijkstra_path(graph: NavGraph, src: int, dst: int) -> list[int]:
    """Minimum-cost node path from src to dst, inclusive of both."""
    n = graph.n_nodes
    if not (0 <= src < n and 0 <= dst < n):
        raise ValueError(f"node ids must be in [0, {n}), got {src}, {dst}")
    if src == dst:
        return [src]
    dist, pred = _dijkstra_full(graph, src)
    if math.isinf(dist[dst]):
        raise RuntimeError(f"node {dst} unreachable from {src}")
    path = [dst]
    while path[-1] != src:
        path.append(pred[path[-1]])
    path.reverse()
    return path


def path_cost(graph: NavGraph, path: list[int]) -> float:
    cost = 0.0
    for u, v in zip(path, path[1:]):
        cost += math.hypot(
            graph.nodes[u][0] - graph.nodes[v][0],
            graph.nodes[u][1] - graph.nodes[v][1],
        )
    return cost


class RoutingTable:
    """All-pairs routing built from one Dijkstra tree per source node."""

    def __init__(self, graph: NavGraph):
        self.graph = graph
        self._pred = []
        self._dist = []
        for src in range(graph.n_nodes):
            dist, pred = _dijkstra_full(graph, src)
            self._dist.append(dist)
            self._pred.append(pred)

    def path(self, src: int, dst: int) -> list[int]:
        if src == dst:
            return [src]
        pred = self._pred[src]
        path = [dst]
        while path[-1] != src:
            nxt = pred[path[-1]]
            if nxt < 0:
                raise RuntimeError(f"node {dst} unreachable from {src}")
            path.append(nxt)
        path.reverse()
        return path

    def cost(self, src: int, dst: int) -> float:
        return self._dist[src][dst]


@lru_cache(maxsize=1)
def get_routing() -> RoutingTable:
    return RoutingTable(build_nav_graph())


def map_to_json(geom: MapGeometry | None = None, graph: NavGraph | None = None) -> str:
    """Export the layout (rectangles + graph adjacency) for debugging/plotting."""
    geom = geom or build_map()
    graph = graph or build_nav_graph()
    as_list = lambda r: [r.x0, r.y0, r.x1, r.y1]
    payload = {
        "version": geom.version,
        "bounds": as_list(geom.bounds),
        "roads": [as_list(r) for r in geom.roads],
        "sidewalks": [as_list(r) for r in geom.sidewalks],
        "crosswalks": [as_list(r) for r in geom.crosswalks],
        "nodes": [list(p) for p in graph.nodes],
        "node_tags": list(graph.tags),
        "edges": [[u, v, w, bool(c)] for u, v, w, c in graph.edges],
    }
    return json.dumps(payload, sort_keys=True)
