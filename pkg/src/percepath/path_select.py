"""Per-class scoring and the end-to-end topological perception-aware planner."""

import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .config import PlannerConfig
from .covisibility import extract_segments
from .errors import EmptyGVDError, InfeasibleError, PlanningError
from .pose_graph import FimParams, build_layers, materialize, score_layers, solve_dp
from .topo_graph import (
    InitialPath,
    build_graph,
    connect_endpoints,
    enumerate_classes,
    extract_gvd,
    h_signature,
    line_cells,
    obstacle_representatives,
)
from .world_map import CameraModel, Pose4, build_esdf

log = logging.getLogger(__name__)


@dataclass
class PlannedPath:
    nodes: list
    class_id: int
    length: float
    seg_costs: list
    c_p_min: float
    q: float = math.nan
    planner: str = "proposed"
    dp_cost: float = math.nan
    segments: list = field(default_factory=list, repr=False)
    initial: InitialPath | None = field(default=None, repr=False)

    @property
    def positions(self):
        return np.array([n.pose.position for n in self.nodes])


@dataclass
class PlanReport:
    selected: PlannedPath
    candidates: list
    rejected: list  # (class_id, reason)
    classes: list
    timings: dict
    featmap: object = field(repr=False, default=None)
    gvd: np.ndarray | None = field(repr=False, default=None)
    graph: object = field(repr=False, default=None)


def worker_count():
    env = os.environ.get("PERCEPATH_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def path_length(nodes):
    pos = np.array([n.pose.position for n in nodes])
    if len(pos) < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.diff(pos, axis=0), axis=1)))


def segment_costs(nodes, n_segments):
    """Mean node logdet per segment; empty segments take the lower neighbour value."""
    sums = np.zeros(n_segments)
    counts = np.zeros(n_segments, dtype=int)
    for n in nodes:
        sums[n.segment] += n.logdet_I
        counts[n.segment] += 1
    costs = [sums[i] / counts[i] if counts[i] else None for i in range(n_segments)]
    out = list(costs)
    for i, c in enumerate(costs):
        if c is not None:
            continue
        left = next((costs[k] for k in range(i - 1, -1, -1) if costs[k] is not None), None)
        right = next((costs[k] for k in range(i + 1, n_segments) if costs[k] is not None), None)
        near = [v for v in (left, right) if v is not None]
        log.debug("segment %d holds no nodes; inheriting neighbour minimum", i)
        out[i] = min(near) if near else math.nan
    return [float(v) for v in out]


def perception_weight(x):
    """Logistic saturation of the information margin, in (0, 1)."""
    return float(expit(x))


def q_value(d, c_p_min, d_min, cfg):
    """Selection score from length and weakest-segment information; lower is better."""
    return cfg.eta_d * (d / d_min - 1.0) - cfg.eta_p * perception_weight(c_p_min - cfg.c_p_thr)


def score_path(path, d_min, cfg):
    """Selection score q of a planned path against the shortest candidate length."""
    return q_value(path.length, path.c_p_min, d_min, cfg)


def _heading_yaws(positions):
    """Yaw along the direction of travel; the last node keeps the incoming heading."""
    yaws = np.zeros(len(positions))
    last = 0.0
    for i in range(len(positions)):
        j = min(i, len(positions) - 2)
        if j < 0:
            break
        d = positions[j + 1, :2] - positions[j, :2]
        if np.hypot(*d) > 1e-12:
            last = math.atan2(d[1], d[0])
        yaws[i] = last
    return yaws


def plan_class(featmap, cam, ipath, cfg, mode="proposed"):
    """Best node chain inside one homology class."""
    params = FimParams(sigma=cam.sigma, epsilon=cfg.epsilon, logdet_floor=cfg.logdet_floor)
    segments = extract_segments(featmap, cam, ipath, eta=cfg.eta, l_min=cfg.l_min)
    rng = np.random.default_rng([cfg.seed, ipath.class_id])
    if mode == "ap":
        graph = build_layers(ipath, segments, featmap, cfg, rng, yaw_count=1)
        graph.yaw_gate = None
        for layer in graph.layers:
            layer.logdet = np.zeros(layer.size)
        dp = solve_dp(graph, cfg.lambda_d, 0.0)
        pos = np.array([graph.layers[j].node_pos()[k] for j, k in enumerate(dp.indices)])
        for j, (layer, yaw) in enumerate(zip(graph.layers, _heading_yaws(pos))):
            graph.layers[j] = type(layer)(positions=pos[j:j + 1], yaws=np.array([yaw]), segment=layer.segment, station=layer.station)
        nodes = materialize(graph, featmap, cam, segments, params, [0] * len(graph.layers))
    else:
        graph = build_layers(ipath, segments, featmap, cfg, rng)
        score_layers(graph, featmap, cam, segments, params)
        dp = solve_dp(graph, cfg.lambda_d, cfg.lambda_p)
        nodes = materialize(graph, featmap, cam, segments, params, dp.indices)
    costs = segment_costs(nodes, len(segments))
    return PlannedPath(
        nodes=nodes,
        class_id=ipath.class_id,
        length=path_length(nodes),
        seg_costs=costs,
        c_p_min=float(min(costs)),
        planner=mode,
        dp_cost=dp.cost,
        segments=segments,
        initial=ipath,
    )


def _straight_class(featmap, start, goal, cfg):
    world = featmap.world
    a = world.cell_of([start.x, start.y, featmap.z_ref])[:2]
    b = world.cell_of([goal.x, goal.y, featmap.z_ref])[:2]
    cells = line_cells(a, b)
    if np.any(featmap.esdf2d[cells[:, 0], cells[:, 1]] < cfg.clearance_min - 1e-12):
        raise InfeasibleError("no obstacles on the slice but the straight line is blocked")
    pts = np.array([[start.x, start.y, featmap.z_ref], [goal.x, goal.y, featmap.z_ref]])
    return InitialPath(cells=cells, points=pts, length=float(np.linalg.norm(pts[1] - pts[0])), hsig=np.zeros(0))


def topological_classes(featmap, start, goal, cfg):
    """(classes, gvd mask, graph) for a feature map and endpoints."""
    try:
        gvd = extract_gvd(featmap, cfg.clearance_min)
    except EmptyGVDError:
        log.info("empty slice; falling back to the straight line")
        return [_straight_class(featmap, start, goal, cfg)], None, None
    world = featmap.world
    graph = build_graph(gvd, world.resolution, tuple(world.origin[:2]))
    graph = connect_endpoints(graph, featmap, start, goal, cfg.clearance_min)
    classes = enumerate_classes(
        graph,
        obstacle_representatives(featmap),
        max_classes=cfg.max_classes,
        max_depth=cfg.max_depth,
        max_length_factor=cfg.max_length_factor,
        max_expansions=cfg.max_expansions,
        start_xy=[start.x, start.y],
        goal_xy=[goal.x, goal.y],
        z_ref=featmap.z_ref,
    )
    return classes, gvd, graph


def select(candidates, cfg):
    """Fill in q for every candidate and return the minimiser."""
    d_min = min(c.length for c in candidates)
    d_min = d_min if d_min > 0 else 1.0
    for c in candidates:
        c.q = float(score_path(c, d_min, cfg))
    return min(candidates, key=lambda c: (c.q, c.length, c.class_id))


def plan(world, start, goal, cfg=None, cam=None, mode="proposed"):
    """Plan a global path; returns ``(PlannedPath, PlanReport)``."""
    cfg = cfg or PlannerConfig()
    cam = cam or CameraModel()
    if mode == "ap":
        cfg = cfg.with_overrides(lambda_p=0.0, eta_p=0.0)
    timings = {}
    t_all = t0 = time.perf_counter()
    z_ref = cfg.z_ref if cfg.z_ref is not None else start.z
    featmap = build_esdf(world, z_ref)
    timings["esdf"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    classes, gvd, graph = topological_classes(featmap, start, goal, cfg)
    timings["topology"] = time.perf_counter() - t0

    t0 = time.perf_counter()

    def run(ip):
        try:
            return plan_class(featmap, cam, ip, cfg, mode)
        except PlanningError as exc:
            return exc

    workers = min(worker_count(), len(classes))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, classes))
    else:
        results = [run(ip) for ip in classes]
    timings["classes"] = time.perf_counter() - t0

    candidates, rejected = [], []
    for ip, r in zip(classes, results):
        if isinstance(r, Exception):
            rejected.append((ip.class_id, f"{type(r).__name__}: {r}"))
        else:
            candidates.append(r)
    if not candidates:
        raise PlanningError("no homology class produced a feasible path: " + "; ".join(r for _, r in rejected))
    candidates.sort(key=lambda c: c.class_id)
    best = select(candidates, cfg)
    timings["total"] = time.perf_counter() - t_all
    report = PlanReport(
        selected=best, candidates=candidates, rejected=rejected, classes=classes,
        timings=timings, featmap=featmap, gvd=gvd, graph=graph,
    )
    return best, report
