"""Layered 4-DoF pose graph, Fisher-information node scores and DP search."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLandmarkError, LayerStarvationError, NoFeasibleChainError
from .world_map import Pose4, wrap_angle


@dataclass(frozen=True)
class FimParams:
    sigma: float = 0.01
    epsilon: float = 1e-9
    logdet_floor: float = -60.0

    def __post_init__(self):
        if not self.sigma > 0 or not self.epsilon > 0:
            raise ValueError("sigma and epsilon must be > 0")


@dataclass(frozen=True)
class PoseNode:
    pose: Pose4
    layer: int
    segment: int
    visible: frozenset
    logdet_I: float
    index: int = 0


@dataclass
class Layer:
    positions: np.ndarray  # (P, 3) accepted sample positions
    yaws: np.ndarray  # (Y,)
    segment: int
    station: float
    logdet: np.ndarray | None = None  # (P * Y,), position-major

    @property
    def size(self):
        return len(self.positions) * len(self.yaws)

    def node_pos(self):
        return np.repeat(self.positions, len(self.yaws), axis=0)

    def node_psi(self):
        return np.tile(self.yaws, len(self.positions))


@dataclass
class PoseGraph:
    layers: list
    yaw_gate: float | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.layers)

    def edge_ok(self, psi_parent, psi_child):
        if self.yaw_gate is None:
            return np.ones(np.broadcast(psi_parent, psi_child).shape, dtype=bool)
        return np.abs(wrap_angle(psi_child - psi_parent)) <= self.yaw_gate + 1e-12


@dataclass
class DPResult:
    indices: list
    cost: float
    c_d: float
    c_p: float


# ---------------------------------------------------------------------------
# Fisher information
# ---------------------------------------------------------------------------

def skew(v):
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _world_to_camera(psi):
    # rows: right, up, forward expressed in the world frame
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[s, -c, 0.0], [0.0, 0.0, 1.0], [c, s, 0.0]])


def bearing_jacobian(l_w, pose):
    """3x6 bearing Jacobian for a landmark; columns are (translation, rotation)."""
    l_w = np.asarray(l_w, dtype=float)
    Rt = _world_to_camera(pose.psi)
    l_c = Rt @ (l_w - pose.position)
    n = float(np.linalg.norm(l_c))
    if n < 1e-9:
        raise DegenerateLandmarkError("landmark coincides with the camera centre")
    proj = np.eye(3) / n - np.outer(l_c, l_c) / n**3
    B = np.hstack([np.eye(3), skew(l_w)])
    return proj @ Rt @ B


def fim_single(l_w, pose, sigma):
    """6x6 Fisher information of one bearing measurement."""
    J = bearing_jacobian(l_w, pose)
    return J.T @ J / sigma**2


def fim_batch(l_w, pos, sigma):
    """Per-landmark FIMs (K, 6, 6) at a position.

    Heading does not enter: the camera rotation cancels in J^T J.
    """
    l_w = np.asarray(l_w, dtype=float).reshape(-1, 3)
    d = l_w - np.asarray(pos, dtype=float)
    n = np.linalg.norm(d, axis=1)
    if np.any(n < 1e-9):
        raise DegenerateLandmarkError("landmark coincides with the camera centre")
    u = d / n[:, None]
    proj = (np.eye(3)[None] - u[:, :, None] * u[:, None, :]) / n[:, None, None]
    K = len(l_w)
    B = np.zeros((K, 3, 6))
    B[:, :, :3] = np.eye(3)
    B[:, 0, 4], B[:, 0, 5] = -l_w[:, 2], l_w[:, 1]
    B[:, 1, 3], B[:, 1, 5] = l_w[:, 2], -l_w[:, 0]
    B[:, 2, 3], B[:, 2, 4] = -l_w[:, 1], l_w[:, 0]
    J = proj @ B
    return np.einsum("kia,kib->kab", J, J) / sigma**2


def logdet_of(info, params):
    """Floored log-determinant of FIM sums (..., 6, 6) plus epsilon * I."""
    sign, ld = np.linalg.slogdet(info + params.epsilon * np.eye(6))
    ld = np.where(sign > 0, ld, params.logdet_floor)
    return np.maximum(ld, params.logdet_floor)


def _score_positions(world, cam, positions, yaws, lm_index, params):
    """logdet for every (position, yaw) node; also the visibility masks."""
    P, Y = len(positions), len(yaws)
    K = len(lm_index)
    if K == 0:
        return np.full(P * Y, max(6 * math.log(params.epsilon), params.logdet_floor)), None
    l_w = world.landmark_pos[lm_index]
    F = np.stack([fim_batch(l_w, p, params.sigma) for p in positions]).reshape(P, K, 36)
    d = l_w[None, :, :] - np.asarray(positions, dtype=float)[:, None, :]
    horiz = np.hypot(d[..., 0], d[..., 1])
    dist = np.hypot(horiz, d[..., 2])
    base = (dist <= cam.range_max) & (np.abs(np.arctan2(d[..., 2], horiz)) <= cam.vfov / 2)
    az = np.arctan2(d[..., 1], d[..., 0])
    rel = wrap_angle(az[:, None, :] - np.asarray(yaws)[None, :, None])
    masks = base[:, None, :] & (np.abs(rel) <= cam.hfov / 2)
    info = np.einsum("pyk,pkf->pyf", masks.astype(float), F).reshape(P * Y, 6, 6)
    return logdet_of(info, params), masks


def score_node(node_pose, featmap, cam, segment, params):
    """logdet of the summed FIM over the segment's co-visible landmarks.

    Range and both FoV limits are re-applied at the node pose; occlusion is
    taken from the segment's stored co-visible set. Returns (logdet, visible).
    """
    world = featmap.world
    idx = np.array(sorted(world.id_to_index[i] for i in segment.covis), dtype=np.int64)
    ld, masks = _score_positions(world, cam, node_pose.position[None], np.array([node_pose.psi]), idx, params)
    vis = frozenset() if masks is None else frozenset(int(i) for i in world.landmark_ids[idx[masks[0, 0]]])
    return float(ld[0]), vis


def score_layers(graph, featmap, cam, segments, params):
    world = featmap.world
    for layer in graph.layers:
        covis = segments[layer.segment].covis
        idx = np.array(sorted(world.id_to_index[i] for i in covis), dtype=np.int64)
        layer.logdet, _ = _score_positions(world, cam, layer.positions, layer.yaws, idx, params)
    return graph


def materialize(graph, featmap, cam, segments, params, indices):
    """PoseNode objects for a chosen chain."""
    nodes = []
    for j, k in enumerate(indices):
        layer = graph.layers[j]
        Y = len(layer.yaws)
        p = layer.positions[k // Y]
        pose = Pose4(*p, layer.yaws[k % Y])
        ld, vis = score_node(pose, featmap, cam, segments[layer.segment], params)
        nodes.append(PoseNode(pose=pose, layer=j, segment=layer.segment, visible=vis, logdet_I=ld, index=int(k)))
    return nodes


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def _station(pts, s, t):
    """Point and unit tangent at arc length ``t`` along a polyline."""
    seg = int(np.clip(np.searchsorted(s, t, side="right") - 1, 0, len(pts) - 2))
    d = pts[seg + 1] - pts[seg]
    L = np.linalg.norm(d)
    frac = 0.0 if L == 0 else (t - s[seg]) / L
    p = pts[seg] + np.clip(frac, 0.0, 1.0) * d
    if L == 0:
        return p, np.array([1.0, 0.0, 0.0])
    return p, d / L


def yaw_bins(count):
    return np.atleast_1d(wrap_angle(np.arange(count) * 2 * math.pi / count))


def build_layers(path, segments, featmap, cfg, rng, yaw_count=None):
    """Sample the layered pose graph around an initial path (unscored)."""
    pts = np.asarray(getattr(path, "points", path), dtype=float)
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    L = float(s[-1])
    step = cfg.step_length
    N = max(1, math.ceil(L / step - 1e-9))
    yaws = yaw_bins(cfg.n_yaw if yaw_count is None else yaw_count)
    seg_ends = np.array([sg.s_end for sg in segments])
    world = featmap.world

    def valid(p):
        if not world.contains(p) or world.occupancy[world.cell_of(p)]:
            return False
        return featmap.clearance_at(p[None])[0] >= cfg.clearance_min - 1e-12

    layers = []
    stations = [j * step for j in range(N)] + [L]
    for j, t in enumerate(stations):
        seg = int(min(np.searchsorted(seg_ends, t - 1e-9), len(segments) - 1))
        p0, tan = _station(pts, s, t)
        if j == 0:
            positions = pts[:1].copy()
        elif j == len(stations) - 1:
            positions = pts[-1:].copy()
        else:
            normal = np.array([-tan[1], tan[0], 0.0])
            nn = np.linalg.norm(normal)
            normal = np.array([1.0, 0.0, 0.0]) if nn < 1e-12 else normal / nn
            up = np.array([0.0, 0.0, 1.0])
            acc = [p0] if valid(p0) else []
            attempts = 0
            while len(acc) < cfg.n_samples and attempts < 10 * cfg.n_samples:
                attempts += 1
                r = cfg.R_sample * math.sqrt(rng.random())
                th = 2 * math.pi * rng.random()
                q = p0 + r * math.cos(th) * normal + r * math.sin(th) * up
                if valid(q):
                    acc.append(q)
            if not acc:
                raise LayerStarvationError(f"no valid samples at station s={t:.3f} m (layer {j})")
            positions = np.array(acc)
        layers.append(Layer(positions=positions, yaws=yaws, segment=seg, station=float(t)))
    return PoseGraph(layers=layers, yaw_gate=cfg.yaw_gate, meta={"N_stations": N, "length": L})


# ---------------------------------------------------------------------------
# search
# ---------------------------------------------------------------------------

def solve_dp(graph, lambda_d, lambda_p):
    """Minimum of lambda_d * length - lambda_p * mean(logdet) over layer chains.

    Ties go to the smaller parent index, then the smaller final index.
    """
    N = len(graph.layers)
    w = lambda_p / N
    first = graph.layers[0]
    cost = 0.0 - w * first.logdet
    parents = []
    for j in range(1, N):
        pl, cl = graph.layers[j - 1], graph.layers[j]
        D = np.linalg.norm(pl.node_pos()[:, None, :] - cl.node_pos()[None, :, :], axis=2)
        ok = graph.edge_ok(pl.node_psi()[:, None], cl.node_psi()[None, :])
        C = np.where(ok, cost[:, None] + lambda_d * D, np.inf)
        par = np.argmin(C, axis=0)
        best = C[par, np.arange(C.shape[1])]
        if not np.isfinite(best).any():
            raise NoFeasibleChainError(f"yaw gating disconnects layers {j - 1} and {j}")
        cost = best - w * cl.logdet
        parents.append(par)
    k = int(np.argmin(cost))
    total = float(cost[k])
    idx = [k]
    for par in reversed(parents):
        idx.append(int(par[idx[-1]]))
    idx.reverse()
    pos = [graph.layers[j].node_pos()[i] for j, i in enumerate(idx)]
    c_d = float(sum(np.linalg.norm(b - a) for a, b in zip(pos[:-1], pos[1:])))
    c_p = float(np.mean([graph.layers[j].logdet[i] for j, i in enumerate(idx)]))
    return DPResult(indices=idx, cost=total, c_d=c_d, c_p=c_p)
