"""Reference planners: perception-agnostic topological (AP) and perception-aware RRT*."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .config import PlannerConfig
from .errors import InfeasibleError, PlanningError
from .path_select import PlannedPath, path_length, plan
from .pose_graph import FimParams, PoseNode, fim_batch, logdet_of
from .world_map import CameraModel, Pose4, build_esdf, unoccluded, wrap_angle


_RRT_STREAM = 0x5252


class NoPathFound(PlanningError):
    """RRT* sampled its budget without reaching the goal."""


def plan_ap(world, start, goal, cfg=None, cam=None):
    """Topological planner that ignores perception: shortest class, shortest chain."""
    return plan(world, start, goal, cfg, cam, mode="ap")


@dataclass
class RrtNode:
    pose: Pose4
    parent: int | None
    cost_d: float
    cost_p: float
    visible: frozenset = field(default_factory=frozenset)
    logdet: float = math.nan


class _Tree:
    def __init__(self, cap):
        self.xy = np.zeros((cap, 2))
        self.parent = np.full(cap, -1, dtype=np.int64)
        self.cost_d = np.zeros(cap)
        self.cost = np.zeros(cap)
        self.edge_d = np.zeros(cap)
        self.edge_c = np.zeros(cap)
        self.yaw = np.zeros(cap)
        self.logdet = np.zeros(cap)
        self.cand = [None] * cap  # yaw-free visible landmark indices
        self.children = [[] for _ in range(cap)]
        self.n = 0

    def nodes(self, z=0.0):
        """Snapshot of the tree as RrtNode records."""
        out = []
        for i in range(self.n):
            p = int(self.parent[i])
            out.append(RrtNode(
                pose=Pose4(self.xy[i, 0], self.xy[i, 1], z, self.yaw[i]),
                parent=None if p < 0 else p,
                cost_d=float(self.cost_d[i]),
                cost_p=float(self.cost[i] - self.cfg_lambda_d * self.cost_d[i]),
                logdet=float(self.logdet[i]),
            ))
        return out


class _RrtStar:
    def __init__(self, world, start, goal, cfg, cam, n_samples, rng):
        self.world = world
        self.cfg = cfg
        self.cam = cam
        self.N = n_samples
        self.rng = rng
        z_ref = cfg.z_ref if cfg.z_ref is not None else start.z
        self.fm = build_esdf(world, z_ref)
        self.z = z_ref
        self.params = FimParams(sigma=cam.sigma, epsilon=cfg.epsilon, logdet_floor=cfg.logdet_floor)
        self.start = np.array([start.x, start.y])
        self.goal = np.array([goal.x, goal.y])
        self.start_psi = start.psi
        for name, p in (("start", self.start), ("goal", self.goal)):
            if self.fm.clearance_at(p[None])[0] < cfg.clearance_min - 1e-12:
                raise InfeasibleError(f"{name} is in collision or too close to an obstacle")
        lo = world.origin[:2]
        self.lo, self.hi = lo, lo + world.extent[:2]
        free_area = float(np.sum(self.fm.esdf2d >= cfg.clearance_min)) * world.resolution**2
        self.gamma = 2.0 * math.sqrt(1.5 * free_area / math.pi)
        self.t = _Tree(n_samples + 1)
        self.t.cfg_lambda_d = cfg.lambda_d

    # geometry -------------------------------------------------------------
    def free_segment(self, a, b):
        L = float(np.linalg.norm(b - a))
        n = max(2, int(math.ceil(L / (0.5 * self.world.resolution))) + 1)
        pts = a[None] + np.linspace(0.0, 1.0, n)[:, None] * (b - a)[None]
        return bool(np.all(self.fm.clearance_at(pts) >= self.cfg.clearance_min - 1e-12))

    def candidates(self, xy):
        """Landmarks in range, vertical FoV and unoccluded (yaw-free)."""
        w = self.world
        if not w.landmarks:
            return np.zeros(0, dtype=np.int64)
        p = np.array([xy[0], xy[1], self.z])
        d = w.landmark_pos - p
        horiz = np.hypot(d[:, 0], d[:, 1])
        dist = np.hypot(horiz, d[:, 2])
        ok = (dist <= self.cam.range_max) & (dist > 0) & (np.abs(np.arctan2(d[:, 2], horiz)) <= self.cam.vfov / 2)
        idx = np.flatnonzero(ok)
        if len(idx):
            idx = idx[unoccluded(w, p, idx)]
        return idx

    def in_fov(self, xy, idx, yaw):
        if len(idx) == 0:
            return idx
        d = self.world.landmark_pos[idx, :2] - xy
        az = wrap_angle(np.arctan2(d[:, 1], d[:, 0]) - yaw)
        return idx[np.abs(np.atleast_1d(az)) <= self.cam.hfov / 2]

    def edge(self, parent, xy, cand):
        """(length, weighted cost, yaw, logdet, co-visible indices) of parent -> xy."""
        t = self.t
        a = t.xy[parent]
        L = float(np.linalg.norm(xy - a))
        yaw = math.atan2(xy[1] - a[1], xy[0] - a[0]) if L > 1e-12 else t.yaw[parent]
        vis_c = self.in_fov(xy, cand, yaw)
        vis_p = self.in_fov(a, t.cand[parent], t.yaw[parent])
        co = np.intersect1d(vis_c, vis_p)
        if len(co):
            info = fim_batch(self.world.landmark_pos[co], [xy[0], xy[1], self.z], self.params.sigma).sum(axis=0)
        else:
            info = np.zeros((6, 6))
        ld = float(logdet_of(info, self.params))
        c = self.cfg
        w = c.lambda_d + c.lambda_p * float(expit(c.c_p_thr - ld))
        return L, L * w, yaw, ld, co

    # tree maintenance ------------------------------------------------------
    def set_parent(self, i, parent, e):
        t = self.t
        old = t.parent[i]
        if old >= 0:
            t.children[old].remove(i)
        t.parent[i] = parent
        t.children[parent].append(i)
        L, c, yaw, ld, _ = e
        t.edge_d[i], t.edge_c[i], t.yaw[i], t.logdet[i] = L, c, yaw, ld
        t.cost_d[i] = t.cost_d[parent] + L
        t.cost[i] = t.cost[parent] + c

    def refresh_subtree(self, i):
        # children's co-visible sets depend on this node's yaw
        t = self.t
        stack = [i]
        while stack:
            u = stack.pop()
            for ch in t.children[u]:
                if u == i:
                    L, c, yaw, ld, _ = self.edge(u, t.xy[ch], t.cand[ch])
                    t.edge_d[ch], t.edge_c[ch], t.logdet[ch] = L, c, ld
                t.cost_d[ch] = t.cost_d[u] + t.edge_d[ch]
                t.cost[ch] = t.cost[u] + t.edge_c[ch]
                stack.append(ch)

    def sample(self):
        if self.rng.random() < self.cfg.rrt_goal_bias:
            return self.goal.copy()
        for _ in range(1000):
            q = self.lo + self.rng.random(2) * (self.hi - self.lo)
            if self.fm.clearance_at(q[None])[0] >= self.cfg.clearance_min:
                return q
        return self.goal.copy()

    def run(self):
        t = self.t
        t.xy[0] = self.start
        t.yaw[0] = self.start_psi
        t.cand[0] = self.candidates(self.start)
        t.n = 1
        step = self.cfg.rrt_step
        for _ in range(self.N):
            q = self.sample()
            xy = t.xy[: t.n]
            near_i = int(np.argmin(np.sum((xy - q) ** 2, axis=1)))
            d = q - xy[near_i]
            L = float(np.linalg.norm(d))
            if L < 1e-9:
                continue
            new = xy[near_i] + d * min(1.0, step / L)
            if not self.free_segment(xy[near_i], new):
                continue
            n = t.n + 1
            r = max(step, min(self.cfg.rrt_rewire_radius, self.gamma * math.sqrt(math.log(n) / n)))
            near = np.flatnonzero(np.sum((xy - new) ** 2, axis=1) <= r * r)
            cand = self.candidates(new)
            t.cand[t.n] = cand
            best = None
            for p in near:
                if not self.free_segment(t.xy[p], new):
                    continue
                e = self.edge(p, new, cand)
                c = t.cost[p] + e[1]
                if best is None or c < best[0] - 1e-12:
                    best = (c, p, e)
            if best is None:
                continue
            i = t.n
            t.xy[i] = new
            t.n += 1
            self.set_parent(i, best[1], best[2])
            for x in near:
                if x == best[1] or x == 0:
                    continue
                if not self.free_segment(new, t.xy[x]):
                    continue
                e = self.edge(i, t.xy[x], t.cand[x])
                if t.cost[i] + e[1] < t.cost[x] - 1e-12:
                    self.set_parent(x, i, e)
                    self.refresh_subtree(x)
        return self.best_branch()

    def best_branch(self):
        t = self.t
        xy = t.xy[: t.n]
        close = np.flatnonzero(np.linalg.norm(xy - self.goal, axis=1) <= self.cfg.rrt_step + 1e-9)
        best = None
        for i in close:
            if np.linalg.norm(xy[i] - self.goal) < 1e-9:
                total = t.cost[i]
                tail = None
            else:
                if not self.free_segment(xy[i], self.goal):
                    continue
                tail = self.edge(i, self.goal, self.candidates(self.goal))
                total = t.cost[i] + tail[1]
            if best is None or total < best[0] - 1e-12:
                best = (total, i, tail)
        if best is None:
            raise NoPathFound(f"goal not reached within {self.N} samples")
        chain = []
        i = best[1]
        while i >= 0:
            chain.append(i)
            i = t.parent[i]
        chain.reverse()
        nodes = []
        for j, i in enumerate(chain):
            ld = t.logdet[i] if j > 0 else self.cfg.logdet_floor
            nodes.append(PoseNode(Pose4(t.xy[i, 0], t.xy[i, 1], self.z, t.yaw[i]), j, 0, frozenset(), float(ld), int(i)))
        if best[2] is not None:
            L, c, yaw, ld, co = best[2]
            nodes.append(PoseNode(Pose4(self.goal[0], self.goal[1], self.z, yaw), len(nodes), 0, frozenset(), float(ld), -1))
        if len(nodes) > 1:
            first = nodes[1].pose
            nodes[0] = PoseNode(Pose4(*nodes[0].pose.position, math.atan2(first.y - nodes[0].pose.y, first.x - nodes[0].pose.x)),
                                0, 0, frozenset(), nodes[0].logdet_I, nodes[0].index)
        mean_ld = float(np.mean([n.logdet_I for n in nodes[1:]])) if len(nodes) > 1 else self.cfg.logdet_floor
        return PlannedPath(
            nodes=nodes, class_id=-1, length=path_length(nodes), seg_costs=[mean_ld],
            c_p_min=mean_ld, planner=f"rrt{self.N}", dp_cost=float(best[0]),
        )


def plan_rrtstar(world, start, goal, cfg=None, cam=None, n_samples=None):
    """Perception-aware RRT* over positions on the flight slice."""
    cfg = cfg or PlannerConfig()
    cam = cam or CameraModel()
    n = cfg.rrt_samples if n_samples is None else n_samples
    if n < 1:
        raise ValueError("n_samples must be >= 1")
    # independent of n so that runs with growing budgets share a sample prefix
    rng = np.random.default_rng([cfg.seed, _RRT_STREAM])
    planner = _RrtStar(world, start, goal, cfg, cam, n, rng)
    path = planner.run()
    path.tree = planner.t
    return path


def _proposed(world, start, goal, cfg, cam):
    return plan(world, start, goal, cfg, cam)[0]


def _ap(world, start, goal, cfg, cam):
    return plan_ap(world, start, goal, cfg, cam)[0]


def get_planner(name):
    """Planner callable by name: ``proposed``, ``ap``, ``rrt`` or ``rrt<N>``."""
    if name == "proposed":
        return _proposed
    if name == "ap":
        return _ap
    if name.startswith("rrt"):
        tail = name[3:].lstrip("-")
        if tail and not tail.isdigit():
            raise KeyError(name)
        n = int(tail) if tail else None

        def _rrt(world, start, goal, cfg, cam):
            return plan_rrtstar(world, start, goal, cfg, cam, n_samples=n)

        return _rrt
    raise KeyError(name)
