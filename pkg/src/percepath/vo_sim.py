"""Bearing-only localisation against the known landmark map.

Stands in for visual odometry: each node of a path is observed through noisy
unit bearings and the 4-DoF pose is re-estimated by Gauss-Newton, seeded with
the previous estimate moved by noisy odometry.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import PlanningError
from .world_map import build_esdf, camera_frame, visible_mask, wrap_angle


@dataclass
class TraversalResult:
    errors: np.ndarray  # per-node position error (m); nan after tracking loss
    rmse: float
    goal_error: float
    failed: bool
    fail_index: int | None
    estimates: np.ndarray = field(repr=False, default=None)


def _rt(psi):
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[s, -c, 0.0], [0.0, 0.0, 1.0], [c, s, 0.0]])


def _drt(psi):
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[c, s, 0.0], [0.0, 0.0, 0.0], [-s, c, 0.0]])


def predict_bearings(x, l_w):
    """Unit bearings (K, 3) and their Jacobians (K, 3, 4) w.r.t. (x, y, z, psi)."""
    Rt = _rt(x[3])
    d = l_w - x[:3]
    l_c = d @ Rt.T
    n = np.linalg.norm(l_c, axis=1)
    h = l_c / n[:, None]
    dh = (np.eye(3)[None] - h[:, :, None] * h[:, None, :]) / n[:, None, None]
    dl = np.empty((len(l_w), 3, 4))
    dl[:, :, :3] = -Rt[None]
    dl[:, :, 3] = d @ _drt(x[3]).T
    return h, dh @ dl


def estimate_pose(l_w, bearings, init, sigma, prior=None, prior_info=None,
                  max_iter=50, tol=1e-10):
    """Gauss-Newton on bearing residuals, optionally with a Gaussian prior.

    Returns ``(x, information)`` where ``information`` is the 4x4 normal matrix.
    """
    x = np.array(init, dtype=float)
    w = 1.0 if sigma == 0 else 1.0 / sigma**2
    H = np.eye(4)
    for _ in range(max_iter):
        h, J = predict_bearings(x, l_w)
        r = (bearings - h).reshape(-1)
        Jf = J.reshape(-1, 4)
        H = w * Jf.T @ Jf
        g = w * Jf.T @ r
        if prior is not None and sigma > 0:
            dx0 = x - prior
            dx0[3] = wrap_angle(dx0[3])
            H = H + prior_info
            g = g - prior_info @ dx0
        dx = np.linalg.solve(H, g)
        x += dx
        x[3] = wrap_angle(x[3])
        if np.linalg.norm(dx) < tol:
            break
    return x, H


def noisy_bearings(l_c, sigma, rng):
    """Unit bearings perturbed by isotropic tangent-plane Gaussian noise."""
    b = l_c / np.linalg.norm(l_c, axis=1, keepdims=True)
    if sigma == 0:
        return b
    ref = np.where(np.abs(b[:, :1]) < 0.9, np.array([[1.0, 0.0, 0.0]]), np.array([[0.0, 1.0, 0.0]]))
    e1 = np.cross(b, ref)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(b, e1)
    n = rng.normal(0.0, sigma, size=(len(b), 2))
    m = b + n[:, :1] * e1 + n[:, 1:] * e2
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def simulate(world, cam, path, noise_seed, sigma=None, odo_sigma=(0.02, 0.01),
             min_landmarks=3, featmap=None):
    """Fly the path, estimate every pose, report errors and tracking loss."""
    sigma = cam.sigma if sigma is None else sigma
    rng = np.random.default_rng(noise_seed)
    nodes = path.nodes if hasattr(path, "nodes") else path
    truth = np.array([[n.pose.x, n.pose.y, n.pose.z, n.pose.psi] for n in nodes], dtype=float)
    if featmap is None:
        featmap = build_esdf(world, truth[0, 2])
    Q = np.diag([odo_sigma[0] ** 2] * 3 + [odo_sigma[1] ** 2])
    if sigma == 0:
        Q = np.zeros((4, 4))
    errors = np.full(len(truth), np.nan)
    est = np.full_like(truth, np.nan)
    x = truth[0].copy()
    P = np.diag([1e-6] * 4)
    fail = None
    for i, tp in enumerate(truth):
        if i > 0:
            step = tp - truth[i - 1]
            step[3] = wrap_angle(step[3])
            noise = np.zeros(4) if sigma == 0 else rng.normal(0.0, 1.0, 4) * np.sqrt(np.diag(Q))
            x = x + step + noise
            x[3] = wrap_angle(x[3])
            P = P + Q
        vis = np.flatnonzero(visible_mask(featmap, cam, tp[:3], tp[3]))
        if len(vis) < min_landmarks:
            fail = i
            break
        l_w = world.landmark_pos[vis]
        meas = noisy_bearings(camera_frame(l_w, tp[:3], tp[3]), sigma, rng)
        x, H = estimate_pose(l_w, meas, x, sigma, prior=x.copy(), prior_info=np.linalg.inv(P))
        P = np.linalg.inv(H) if sigma > 0 else P
        est[i] = x
        errors[i] = float(np.linalg.norm(x[:3] - tp[:3]))
    done = errors[~np.isnan(errors)]
    rmse = float(np.sqrt(np.mean(done**2))) if len(done) else math.nan
    failed = fail is not None
    goal_error = math.nan if failed else float(errors[-1])
    return TraversalResult(errors=errors, rmse=rmse, goal_error=goal_error, failed=failed,
                           fail_index=fail, estimates=est)


BENCH_COLUMNS = ("planner", "length", "goal_error", "success", "time")
DETAIL_COLUMNS = ("planner", "run", "seed", "planned", "length", "goal_error", "failed", "fail_index", "rmse", "time")


def benchmark(world, start, goal, planners, n_runs, seeds, cfg, cam):
    """Plan and fly each planner ``n_runs`` times; Table-II style summary.

    ``planners`` maps a name to ``fn(world, start, goal, cfg, cam) -> path``.
    Returns ``(summary_rows, detail_rows)`` as lists of dicts.
    """
    if len(seeds) < n_runs:
        raise ValueError("need one seed per run")
    summary, detail = [], []
    for name, fn in planners.items():
        rows = []
        for r in range(n_runs):
            seed = int(seeds[r])
            t0 = time.perf_counter()
            try:
                path = fn(world, start, goal, cfg.with_overrides(seed=seed), cam)
            except PlanningError:
                path = None
            elapsed = time.perf_counter() - t0
            if path is None:
                rows.append(dict(planner=name, run=r, seed=seed, planned=False, length=math.nan,
                                 goal_error=math.nan, failed=True, fail_index=None, rmse=math.nan, time=elapsed))
                continue
            res = simulate(world, cam, path, noise_seed=seed)
            rows.append(dict(planner=name, run=r, seed=seed, planned=True, length=path.length,
                             goal_error=res.goal_error, failed=res.failed, fail_index=res.fail_index,
                             rmse=res.rmse, time=elapsed))
        detail.extend(rows)
        ok = [x for x in rows if not x["failed"]]
        planned = [x for x in rows if x["planned"]]
        summary.append(dict(
            planner=name,
            length=float(np.mean([x["length"] for x in planned])) if planned else math.nan,
            goal_error=float(np.mean([x["goal_error"] for x in ok])) if ok else math.nan,
            success=len(ok) / n_runs,
            time=float(np.mean([x["time"] for x in rows])),
        ))
    return summary, detail
