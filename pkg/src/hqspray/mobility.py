"""Road graph, shortest paths and per-tick node movement."""
from __future__ import annotations

import heapq
import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .config import RANDOM_WAYPOINT, SHORTEST_PATH, STATIONARY, GroupConfig, MapConfig

_EPS = 1e-9


class MapError(ValueError):
    pass


class MapGraph:
    """Undirected road graph; edge weight is Euclidean length in meters."""

    def __init__(self, vertices: list[tuple[float, float]], edges: list[tuple[int, int]]):
        self.vertices = [(float(x), float(y)) for x, y in vertices]
        self.xy = np.array(self.vertices, dtype=np.float64).reshape(-1, 2)
        if not np.isfinite(self.xy).all():
            raise MapError("non-finite vertex coordinate")
        self.adj: list[list[tuple[int, float]]] = [[] for _ in self.vertices]
        seen = set()
        self.edges: list[tuple[int, int, float]] = []
        for a, b in edges:
            if a == b:
                continue
            key = (min(a, b), max(a, b))
            if key in seen:
                continue
            seen.add(key)
            length = math.dist(self.vertices[a], self.vertices[b])
            if length <= 0:
                raise MapError(f"zero-length edge {key}")
            self.edges.append((key[0], key[1], length))
            self.adj[a].append((b, length))
            self.adj[b].append((a, length))
        for lst in self.adj:
            lst.sort()
        self._to_target: dict[int, list[float]] = {}

    def __len__(self):
        return len(self.vertices)

    def components(self) -> list[list[int]]:
        seen = [False] * len(self)
        comps = []
        for s in range(len(self)):
            if seen[s]:
                continue
            stack, comp = [s], []
            seen[s] = True
            while stack:
                v = stack.pop()
                comp.append(v)
                for u, _ in self.adj[v]:
                    if not seen[u]:
                        seen[u] = True
                        stack.append(u)
            comps.append(sorted(comp))
        return comps

    def bounds(self) -> tuple[float, float, float, float]:
        lo = self.xy.min(axis=0)
        hi = self.xy.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def nearest_vertex(self, x: float, y: float) -> int:
        d = (self.xy[:, 0] - x) ** 2 + (self.xy[:, 1] - y) ** 2
        return int(np.argmin(d))

    def distances_to(self, target: int) -> list[float]:
        """Dijkstra distances from every vertex to ``target`` (cached)."""
        dist = self._to_target.get(target)
        if dist is None:
            dist = [math.inf] * len(self)
            dist[target] = 0.0
            heap = [(0.0, target)]
            while heap:
                d, v = heapq.heappop(heap)
                if d > dist[v]:
                    continue
                for u, w in self.adj[v]:
                    nd = d + w
                    if nd < dist[u]:
                        dist[u] = nd
                        heapq.heappush(heap, (nd, u))
            self._to_target[target] = dist
        return dist


def _check_connected(graph: MapGraph) -> MapGraph:
    if len(graph) == 0:
        raise MapError("empty map")
    comps = graph.components()
    if len(comps) > 1:
        sizes = ", ".join(str(len(c)) for c in comps)
        raise MapError(f"map is disconnected: {len(comps)} components (sizes {sizes})")
    return graph


_LINESTRING = re.compile(r"^LINESTRING\s*\((.*)\)\s*$", re.IGNORECASE)


def load_map(text: str) -> MapGraph:
    """Parse ``LINESTRING (x1 y1, x2 y2, ...)`` lines into a connected graph."""
    index: dict[tuple[float, float], int] = {}
    vertices: list[tuple[float, float]] = []
    edges: list[tuple[int, int]] = []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _LINESTRING.match(line)
        if not m:
            raise MapError(f"line {no}: expected LINESTRING (...), got {line[:40]!r}")
        prev = None
        points = m.group(1).split(",")
        if len(points) < 2:
            raise MapError(f"line {no}: LINESTRING needs at least two points")
        for pt in points:
            parts = pt.split()
            if len(parts) != 2:
                raise MapError(f"line {no}: bad point {pt.strip()!r}")
            try:
                xy = (float(parts[0]), float(parts[1]))
            except ValueError:
                raise MapError(f"line {no}: bad point {pt.strip()!r}") from None
            if not all(math.isfinite(c) for c in xy):
                raise MapError(f"line {no}: non-finite coordinate")
            v = index.get(xy)
            if v is None:
                v = index[xy] = len(vertices)
                vertices.append(xy)
            if prev is not None and prev != v:
                edges.append((prev, v))
            prev = v
    return _check_connected(MapGraph(vertices, edges))


def synth_grid(rows: int, cols: int, spacing: float) -> MapGraph:
    """Lattice of ``rows x cols`` vertices; vertex ``r * cols + c`` sits at ``(c, r) * spacing``."""
    if rows < 2 or cols < 2:
        raise MapError("grid needs at least 2 rows and 2 columns")
    if not spacing > 0:
        raise MapError("grid spacing must be > 0")
    vertices = [(c * spacing, r * spacing) for r in range(rows) for c in range(cols)]
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return MapGraph(vertices, edges)


def build_map(cfg: MapConfig) -> MapGraph:
    if cfg.map_file:
        with open(cfg.map_file, encoding="utf-8") as fh:
            return load_map(fh.read())
    return synth_grid(cfg.grid_rows, cfg.grid_cols, cfg.grid_spacing)


def shortest_path(graph: MapGraph, source: int, target: int) -> list[int]:
    """Minimal-length vertex path; among equal-length paths the lexicographically smallest."""
    dist = graph.distances_to(target)
    path = [source]
    v = source
    while v != target:
        dv = dist[v]
        for u, w in graph.adj[v]:  # adjacency is sorted by vertex index
            if abs(dist[u] + w - dv) <= _EPS * max(1.0, dv):
                v = u
                break
        else:
            raise MapError(f"no path from {source} to {target}")
        path.append(v)
    return path


def path_length(graph: MapGraph, path: list[int]) -> float:
    return sum(math.dist(graph.vertices[a], graph.vertices[b]) for a, b in zip(path, path[1:]))


@dataclass
class MovementState:
    """One node's movement: where it is, where it is heading, and its pause."""
    x: float
    y: float
    path: list[int] = field(default_factory=list)  # remaining waypoints, head is the current target
    speed: float = 0.0
    wait_until: float = 0.0
    vertex: int = -1  # last vertex reached (-1 when off-map)
    target: tuple[float, float] | None = None  # free-space target of a random-waypoint leg


# anchors, as fractions of the map bounding box, for stationary hosts without a fixed position
_ANCHORS = [(0.5, 0.5), (0.25, 0.25), (0.75, 0.75), (0.25, 0.75), (0.75, 0.25)]


class MovementField:
    """Positions and movement state of every node, advanced one tick at a time.

    Free movement runs through the vectorised kernel; arrivals at waypoints
    (which draw random numbers) are handled per node here.
    """

    def __init__(self, graph: MapGraph, groups: list[GroupConfig], rngs: list[np.random.Generator]):
        n = len(groups)
        self.graph = graph
        self.groups = groups
        self.rngs = rngs
        self.x = np.zeros(n)
        self.y = np.zeros(n)
        self.tx = np.zeros(n)
        self.ty = np.zeros(n)
        self.speed = np.zeros(n)
        self.wait_until = np.zeros(n)
        self.leftover = np.zeros(n)
        self.moving = np.zeros(n, dtype=np.uint8)
        self.paths: list[list[int]] = [[] for _ in range(n)]
        self.vertex = [-1] * n
        self._free_targets: dict[int, tuple[float, float]] = {}

    @classmethod
    def place(cls, graph: MapGraph, groups: list[GroupConfig], rngs: list[np.random.Generator]) -> MovementField:
        """Initial placement: fixed positions where configured, random vertices otherwise."""
        field_ = cls(graph, groups, rngs)
        x0, y0, x1, y1 = graph.bounds()
        anchor = 0
        for i, g in enumerate(groups):
            rng = rngs[i]
            if g.movement == STATIONARY:
                if g.fixed_position is not None:
                    px, py = g.fixed_position
                elif anchor < len(_ANCHORS):
                    fx, fy = _ANCHORS[anchor]
                    px, py = graph.vertices[graph.nearest_vertex(x0 + fx * (x1 - x0), y0 + fy * (y1 - y0))]
                    anchor += 1
                else:
                    px, py = graph.vertices[int(rng.integers(len(graph)))]
                field_.x[i], field_.y[i] = px, py
                continue
            if g.fixed_position is not None:
                v = graph.nearest_vertex(*g.fixed_position)
            else:
                v = int(rng.integers(len(graph)))
            field_.vertex[i] = v
            field_.x[i], field_.y[i] = graph.vertices[v]
            field_.moving[i] = 1
            field_._new_trip(i, 0.0, wait=False)
        return field_

    def state(self, i: int) -> MovementState:
        return MovementState(float(self.x[i]), float(self.y[i]), list(self.paths[i]), float(self.speed[i]),
                             float(self.wait_until[i]), self.vertex[i], self._free_targets.get(i))

    def set_state(self, i: int, st: MovementState) -> None:
        self.x[i], self.y[i] = st.x, st.y
        self.paths[i] = list(st.path)
        self.speed[i] = st.speed
        self.wait_until[i] = st.wait_until
        self.vertex[i] = st.vertex
        if st.target is not None:
            self._free_targets[i] = st.target
        self._aim(i)

    def _aim(self, i: int) -> None:
        if self.paths[i]:
            self.tx[i], self.ty[i] = self._coords(i, self.paths[i][0])
        else:
            self.tx[i], self.ty[i] = self.x[i], self.y[i]

    def _coords(self, i: int, wp: int) -> tuple[float, float]:
        if wp >= 0:
            return self.graph.vertices[wp]
        return self._free_targets[i]

    def _new_trip(self, i: int, now: float, wait: bool = True) -> None:
        g = self.groups[i]
        rng = self.rngs[i]
        if wait:
            self.wait_until[i] = now + rng.uniform(g.wait_min, g.wait_max)
        if g.movement == RANDOM_WAYPOINT:
            x0, y0, x1, y1 = self.graph.bounds()
            self._free_targets[i] = (float(rng.uniform(x0, x1)), float(rng.uniform(y0, y1)))
            self.paths[i] = [-1]
        else:
            here = self.vertex[i]
            dest = here
            while dest == here:  # a trip to the current vertex is redrawn
                dest = int(rng.integers(len(self.graph)))
            self.paths[i] = shortest_path(self.graph, here, dest)[1:]
        self.speed[i] = rng.uniform(g.speed_min, g.speed_max)
        self._aim(i)

    def advance(self, t0: float, dt: float) -> None:
        """Move all nodes from ``t0`` to ``t0 + dt``."""
        arrived = _kernels.advance(self.x, self.y, self.tx, self.ty, self.speed, self.wait_until,
                                   self.moving, t0, dt, self.leftover)
        t1 = t0 + dt
        for i in arrived.tolist():
            self._on_arrival(i, float(self.leftover[i]), t1)

    def _on_arrival(self, i: int, left: float, now: float) -> None:
        while True:
            path = self.paths[i]
            self.vertex[i] = path.pop(0)
            if not path:
                self._new_trip(i, now)
                return
            self._aim(i)
            if left <= 0:
                return
            dx = self.tx[i] - self.x[i]
            dy = self.ty[i] - self.y[i]
            dist = math.sqrt(dx * dx + dy * dy)
            if left < dist:
                f = left / dist
                self.x[i] = self.x[i] + dx * f
                self.y[i] = self.y[i] + dy * f
                return
            self.x[i], self.y[i] = self.tx[i], self.ty[i]
            left = left - dist


def next_position(state: MovementState, group: GroupConfig, graph: MapGraph, now: float, dt: float,
                  rng: np.random.Generator) -> MovementState:
    """Advance a single node by ``dt`` seconds starting at time ``now``."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if group.movement == STATIONARY:
        return MovementState(state.x, state.y, list(state.path), state.speed, state.wait_until, state.vertex,
                             state.target)
    f = MovementField(graph, [group], [rng])
    f.moving[0] = 1
    f.set_state(0, state)
    f.advance(now, dt)
    return f.state(0)


__all__ = [
    "MapError", "MapGraph", "MovementField", "MovementState", "build_map", "load_map", "next_position",
    "path_length", "shortest_path", "synth_grid", "SHORTEST_PATH",
]
