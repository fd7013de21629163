"""Voronoi skeleton of the flight slice, its sparse graph, and homology classes."""

import heapq
import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from skimage.morphology import thin

from . import _accel
from .errors import DisconnectedError, EmptyGVDError, InfeasibleError

log = logging.getLogger(__name__)

_N8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))
_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass
class Edge:
    a: int
    b: int
    cells: np.ndarray  # (k, 2) polyline from vertex a's cell to vertex b's cell
    length: float

    def other(self, v):
        return self.b if v == self.a else self.a

    def oriented(self, v):
        """Polyline starting at vertex ``v``."""
        return self.cells if v == self.a else self.cells[::-1]


@dataclass
class TopoGraph:
    vertices: list
    edges: list
    resolution: float = 1.0
    origin: tuple = (0.0, 0.0)
    start: int | None = None
    goal: int | None = None
    adjacency: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.adjacency:
            self.reindex()

    def reindex(self):
        adj = {v: [] for v in range(len(self.vertices))}
        for eid, e in enumerate(self.edges):
            adj[e.a].append(eid)
            if e.b != e.a:
                adj[e.b].append(eid)
        self.adjacency = adj

    def cell_xy(self, cells):
        cells = np.asarray(cells, dtype=float)
        return np.asarray(self.origin) + (cells + 0.5) * self.resolution

    def neighbours(self, v):
        return [self.edges[e].other(v) for e in self.adjacency[v]]


@dataclass
class InitialPath:
    cells: np.ndarray  # (k, 2) slice cells, start projection first
    points: np.ndarray  # (k, 3) metres at z_ref; endpoints are the exact start/goal
    length: float
    hsig: np.ndarray
    class_id: int = 0
    vertices: tuple = ()


# ---------------------------------------------------------------------------
# skeleton
# ---------------------------------------------------------------------------

def _nearest_obstacle_fields(occ2d):
    """Per-cell squared distance, nearest-site offset and nearest component.

    The slice is padded with an occupied ring so the grid boundary acts as an
    obstacle.
    """
    padded = np.pad(occ2d, 1, constant_values=True)
    d2, si, sj = _accel.edt_2d(padded)
    labels, _ = ndimage.label(padded, structure=_EIGHT)
    ii, jj = np.indices(padded.shape)
    comp = labels[si, sj]
    vec = np.stack([si - ii, sj - jj], axis=-1)
    return padded, d2, vec, comp


def gvd_mask(featmap, clearance_min=0.0):
    """Unthinned Voronoi band: free cells where nearest obstacles disagree."""
    occ = featmap.slice_occupancy
    if not occ.any():
        raise EmptyGVDError("slice has no obstacles; plan a straight line instead")
    res = featmap.world.resolution
    padded, d2, vec, comp = _nearest_obstacle_fields(occ)
    free = ~padded
    mark = np.zeros_like(free)
    for axis in (0, 1):
        a = [slice(None), slice(None)]
        b = [slice(None), slice(None)]
        a[axis] = slice(0, -1)
        b[axis] = slice(1, None)
        a, b = tuple(a), tuple(b)
        both = free[a] & free[b]
        dot = np.einsum("ijk,ijk->ij", vec[a], vec[b])
        flag = both & ((comp[a] != comp[b]) | (dot < 0))
        mark[a] |= flag
        mark[b] |= flag
    clear = np.sqrt(d2) * res >= clearance_min - 1e-12
    mark &= clear & free
    return mark[1:-1, 1:-1]


def extract_gvd(featmap, clearance_min=0.0):
    """Boolean slice mask of the thinned generalised Voronoi diagram."""
    return thin(gvd_mask(featmap, clearance_min)).astype(bool)


def gvd_components(mask):
    return ndimage.label(mask, structure=_EIGHT)[1]


# ---------------------------------------------------------------------------
# graph
# ---------------------------------------------------------------------------

def _step_len(cells):
    if len(cells) < 2:
        return 0.0
    d = np.abs(np.diff(cells, axis=0))
    return float(np.sum(np.where(d.sum(axis=1) == 2, math.sqrt(2.0), 1.0)))


def _bfs_within(start, goal, allowed):
    """Shortest 8-connected cell path inside ``allowed`` (a set)."""
    if start == goal:
        return [start]
    prev = {start: None}
    q = deque([start])
    while q:
        c = q.popleft()
        for di, dj in _N8:
            n = (c[0] + di, c[1] + dj)
            if n in allowed and n not in prev:
                prev[n] = c
                if n == goal:
                    out = [n]
                    while prev[out[-1]] is not None:
                        out.append(prev[out[-1]])
                    return out[::-1]
                q.append(n)
    raise ValueError("cells not connected")


def build_graph(gvd, resolution=1.0, origin=(0.0, 0.0)):
    """Vertices (GVD-neighbour count 1 or >= 3) and traced edges of a skeleton."""
    gvd = np.asarray(gvd, dtype=bool)
    cells = {tuple(int(v) for v in c) for c in np.argwhere(gvd)}
    counts = ndimage.convolve(gvd.astype(int), _EIGHT.astype(int), mode="constant") - gvd
    count = {c: int(counts[c]) for c in cells}
    is_vertex = {c for c in cells if count[c] != 2}

    # adjacent vertex cells form one junction cluster
    vmask = np.zeros_like(gvd)
    for c in is_vertex:
        vmask[c] = True
    lab, nlab = ndimage.label(vmask, structure=_EIGHT)
    clusters = [[] for _ in range(nlab)]
    for c in sorted(is_vertex):
        clusters[lab[c] - 1].append(c)
    vertices = []
    cluster_of = {}
    for members in sorted(clusters, key=lambda m: m[0]):
        rep = min(members, key=lambda c: (-count[c], c))
        vid = len(vertices)
        vertices.append(rep)
        for c in members:
            cluster_of[c] = vid
    cluster_cells = {}
    for c, vid in cluster_of.items():
        cluster_cells.setdefault(vid, set()).add(c)

    edges = []
    visited = set()

    def trace(vid, c0, n):
        seq = [n]
        visited.add(n)
        prev, cur = c0, n
        while True:
            nxt = [
                m for m in ((cur[0] + di, cur[1] + dj) for di, dj in _N8)
                if m in cells and m != prev
            ]
            if len(nxt) != 1:  # pragma: no cover - count-2 cells have one successor
                return None
            nxt = nxt[0]
            if nxt in cluster_of:
                end = cluster_of[nxt]
                head = _bfs_within(vertices[vid], c0, cluster_cells[vid])
                tail = _bfs_within(nxt, vertices[end], cluster_cells[end])
                poly = np.array(head + seq + tail, dtype=np.int64)
                return Edge(vid, end, poly, _step_len(poly) * resolution)
            if nxt in visited:  # pragma: no cover
                return None
            seq.append(nxt)
            visited.add(nxt)
            prev, cur = cur, nxt

    def trace_from(vid):
        for c in sorted(cluster_cells[vid]):
            for di, dj in _N8:
                n = (c[0] + di, c[1] + dj)
                if n in cells and n not in cluster_of and n not in visited:
                    e = trace(vid, c, n)
                    if e is not None:
                        edges.append(e)

    for vid in range(len(vertices)):
        trace_from(vid)

    # isolated cycles: insert one vertex and close the loop
    for c in sorted(cells - visited - set(cluster_of)):
        if c in visited:
            continue
        vid = len(vertices)
        vertices.append(c)
        cluster_of[c] = vid
        cluster_cells[vid] = {c}
        trace_from(vid)

    return TopoGraph(vertices=vertices, edges=edges, resolution=resolution, origin=tuple(origin))


def line_cells(a, b):
    """8-connected cells along the straight segment between two cells."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = int(np.ceil(np.max(np.abs(b - a)) * 4)) + 1
    t = np.linspace(0.0, 1.0, n + 1)
    pts = np.floor(a[None] + 0.5 + t[:, None] * (b - a)[None]).astype(np.int64)
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
    pts = pts[keep]
    # diagonal corner cuts are fine for 8-connectivity; guarantee adjacency
    out = [tuple(pts[0])]
    for p in pts[1:]:
        q = out[-1]
        if max(abs(p[0] - q[0]), abs(p[1] - q[1])) > 1:  # pragma: no cover - dense sampling
            out.extend(_bfs_line(q, tuple(p))[1:])
        else:
            out.append(tuple(p))
    return np.array(out, dtype=np.int64)


def _bfs_line(a, b):
    out = [a]
    while out[-1] != b:
        c = out[-1]
        out.append((c[0] + int(np.sign(b[0] - c[0])), c[1] + int(np.sign(b[1] - c[1]))))
    return out


def _grid_search(passable, start, targets):
    """Dijkstra on the 8-connected grid until any target cell is settled."""
    nx, ny = passable.shape
    dist = {start: 0.0}
    prev = {start: None}
    heap = [(0.0, start)]
    while heap:
        d, c = heapq.heappop(heap)
        if d > dist[c]:
            continue
        if c in targets:
            out = [c]
            while prev[out[-1]] is not None:
                out.append(prev[out[-1]])
            return np.array(out[::-1], dtype=np.int64)
        for di, dj in _N8:
            n = (c[0] + di, c[1] + dj)
            if not (0 <= n[0] < nx and 0 <= n[1] < ny) or not passable[n]:
                continue
            nd = d + (math.sqrt(2.0) if di and dj else 1.0)
            if nd < dist.get(n, math.inf) - 1e-12:
                dist[n] = nd
                prev[n] = c
                heapq.heappush(heap, (nd, n))
    return None


def _cell_lookup(graph):
    where = {}
    for vid, c in enumerate(graph.vertices):
        where[tuple(c)] = ("v", vid, 0)
    for eid, e in enumerate(graph.edges):
        for m, c in enumerate(e.cells):
            c = (int(c[0]), int(c[1]))
            if c not in where:
                where[c] = ("e", eid, m)
    return where


def _attach(graph, cell):
    """Vertex id at ``cell``, splitting the containing edge if needed."""
    kind, idx, m = _cell_lookup(graph)[cell]
    if kind == "v":
        return idx
    e = graph.edges[idx]
    if m == 0:
        return e.a
    if m == len(e.cells) - 1:
        return e.b
    vid = len(graph.vertices)
    graph.vertices.append(cell)
    res = graph.resolution
    first = e.cells[: m + 1]
    second = e.cells[m:]
    graph.edges[idx] = Edge(e.a, vid, first, _step_len(first) * res)
    graph.edges.append(Edge(vid, e.b, second, _step_len(second) * res))
    graph.reindex()
    return vid


def connect_endpoints(graph, featmap, start, goal, clearance_min=0.0):
    """Copy of ``graph`` with start and goal vertices wired to the skeleton."""
    world = featmap.world
    res = world.resolution
    g = TopoGraph(
        vertices=list(graph.vertices),
        edges=list(graph.edges),
        resolution=graph.resolution,
        origin=graph.origin,
    )
    passable = featmap.esdf2d >= clearance_min - 1e-12
    passable &= ~featmap.slice_occupancy
    ids = []
    for name, pose in (("start", start), ("goal", goal)):
        p = np.array([pose.x, pose.y, featmap.z_ref])
        if not world.contains(p):
            raise InfeasibleError(f"{name} lies outside the grid")
        cell3 = world.cell_of(p)
        if world.occupancy[cell3]:
            raise InfeasibleError(f"{name} is in collision")
        cell = cell3[:2]
        if featmap.esdf2d[cell] < clearance_min - 1e-12:
            raise InfeasibleError(
                f"{name} clearance {featmap.esdf2d[cell]:.3f} m < {clearance_min} m"
            )
        lookup = _cell_lookup(g)
        if not lookup:
            raise DisconnectedError("skeleton is empty")
        cand = np.array(sorted(lookup), dtype=np.int64)
        d2 = ((cand - np.array(cell)) ** 2).sum(axis=1)
        order = np.lexsort((cand[:, 1], cand[:, 0], d2))
        nearest = tuple(int(v) for v in cand[order[0]])
        line = line_cells(cell, nearest)
        if np.all(passable[line[:, 0], line[:, 1]]):
            link = line
        else:
            link = _grid_search(passable, cell, set(lookup))
            if link is None:
                raise DisconnectedError(f"{name} cannot reach the skeleton")
        attach = tuple(int(v) for v in link[-1])
        vid = _attach(g, attach)
        if len(link) > 1:
            sid = len(g.vertices)
            g.vertices.append(cell)
            g.edges.append(Edge(sid, vid, link, _step_len(link) * res))
            g.reindex()
            vid = sid
        ids.append(vid)
    g.start, g.goal = ids
    if not np.isfinite(_dist_to(g, g.goal)[g.start]):
        raise DisconnectedError("start and goal lie in different free regions")
    return g


# ---------------------------------------------------------------------------
# homology classes
# ---------------------------------------------------------------------------

def obstacle_representatives(featmap):
    """One point (metres) per 8-connected obstacle component of the slice.

    The component centroid, snapped to the closest member cell when the
    centroid falls outside the component.
    """
    occ = featmap.slice_occupancy
    labels, n = ndimage.label(occ, structure=_EIGHT)
    world = featmap.world
    reps = []
    for k in range(1, n + 1):
        members = np.argwhere(labels == k)
        cen = members.mean(axis=0)
        c = np.floor(cen).astype(int)
        if labels[c[0], c[1]] != k:
            c = members[np.argmin(((members - cen) ** 2).sum(axis=1))]
        reps.append(world.origin[:2] + (c + 0.5) * world.resolution)
    return np.array(reps, dtype=float).reshape(-1, 2)


def h_signature(points, obstacles):
    """Total winding angle of a polyline about each obstacle point (radians)."""
    pts = np.asarray(points, dtype=float)[:, :2]
    obs = np.asarray(obstacles, dtype=float).reshape(-1, 2)
    if len(obs) == 0 or len(pts) < 2:
        return np.zeros(len(obs))
    rel = pts[:, None, :] - obs[None, :, :]
    ang = np.arctan2(rel[..., 1], rel[..., 0])
    inc = np.diff(ang, axis=0)
    inc = np.mod(inc + np.pi, 2 * np.pi) - np.pi
    return inc.sum(axis=0)


def _dist_to(graph, target):
    dist = np.full(len(graph.vertices), np.inf)
    dist[target] = 0.0
    heap = [(0.0, target)]
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        for eid in graph.adjacency[v]:
            e = graph.edges[eid]
            u = e.other(v)
            nd = d + e.length
            if nd < dist[u]:
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    return dist


def path_polyline(graph, vseq, eseq):
    parts = []
    for v, eid in zip(vseq, eseq):
        poly = graph.edges[eid].oriented(v)
        parts.append(poly if not parts else poly[1:])
    return np.concatenate(parts, axis=0)


def enumerate_classes(graph, obstacles, max_classes=10, max_depth=64,
                      max_length_factor=3.0, max_expansions=200_000,
                      start_xy=None, goal_xy=None, z_ref=0.0):
    """Breadth-first search over simple vertex paths, one path per H-signature.

    Returns at most ``max_classes`` paths (shortest first), each no longer
    than ``max_length_factor`` times the shortest path in the graph.
    """
    s, t = graph.start, graph.goal
    to_goal = _dist_to(graph, t)
    if not np.isfinite(to_goal[s]):
        raise DisconnectedError("no path between start and goal in the graph")
    bound = max_length_factor * to_goal[s] + 1e-9
    found = []  # (length, vseq, eseq)
    q = deque([(s, (s,), (), 0.0)])
    expansions = 0
    while q:
        v, vseq, eseq, length = q.popleft()
        if v == t:
            found.append((length, vseq, eseq))
            continue
        if len(vseq) > max_depth:
            continue
        for eid in graph.adjacency[v]:
            e = graph.edges[eid]
            u = e.other(v)
            if u in vseq:
                continue
            nl = length + e.length
            if nl + to_goal[u] > bound:
                continue
            expansions += 1
            q.append((u, vseq + (u,), eseq + (eid,), nl))
        if expansions > max_expansions:
            log.warning("class enumeration stopped after %d expansions", expansions)
            break

    obstacles = np.asarray(obstacles, dtype=float).reshape(-1, 2)
    classes = []  # [length, hsig, cells, points, vseq]
    for length, vseq, eseq in sorted(found, key=lambda f: (f[0], f[1])):
        cells = path_polyline(graph, vseq, eseq) if eseq else np.array([graph.vertices[s]])
        xy = graph.cell_xy(cells)
        if start_xy is not None:
            xy[0] = start_xy
        if goal_xy is not None:
            xy[-1] = goal_xy
        sig = h_signature(xy, obstacles)
        if any(np.all(np.abs(sig - c[1]) <= 1e-6) for c in classes):
            continue
        pts = np.column_stack([xy, np.full(len(xy), z_ref)])
        classes.append([float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1))), sig, cells, pts, vseq])
    classes.sort(key=lambda c: c[0])
    out = []
    for cid, (length, sig, cells, pts, vseq) in enumerate(classes[:max_classes]):
        out.append(InitialPath(cells=cells, points=pts, length=length, hsig=sig, class_id=cid, vertices=vseq))
    if not out:
        raise DisconnectedError("no start-goal path within the search limits")
    return out
