"""Acceptance criteria, one test each.

A PASS/FAIL line per criterion is printed in the pytest terminal summary.
"""

import math
import time

import numpy as np
import pytest

from percepath.baselines import plan_ap
from percepath.cli import main as cli_main
from percepath.config import PlannerConfig
from percepath.covisibility import covis_ratio, depth_bound, extract_segments, vis_candidates
from percepath.errors import NoFeasibleChainError
from percepath.path_select import plan, topological_classes
from percepath.pose_graph import fim_single, solve_dp
from percepath.scenario import gallery_like, storage_like
from percepath.vo_sim import estimate_pose, noisy_bearings, simulate
from percepath.world_map import build_esdf, camera_frame, visible_mask

from conftest import brute_esdf, extrude
from oracles import bfs_class_count, brute_class_count, random_class_world, random_feature_world
from test_pose_graph import _oracle, _random_graph, fd_jacobian, random_pairs


def _report(n, ok, detail):
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


def _south(path):
    return float(np.mean(path.positions[:, 1])) < 5.0


def _n_classes(sc):
    fm = build_esdf(sc.world(), sc.start.z)
    return len(topological_classes(fm, sc.start, sc.goal, sc.config())[0])


@pytest.mark.criterion(1, "homology classes: storage 2, gallery >= 4, brute force agrees on 20 worlds, < 10 s")
def test_c1_homology(storage, gallery):
    t0 = time.perf_counter()
    n_storage, n_gallery = _n_classes(storage), _n_classes(gallery)
    mismatches = []
    for seed in range(20):
        fm, start, goal = random_class_world(seed)
        assert fm.esdf2d.shape[0] <= 24 and fm.esdf2d.shape[1] <= 24
        n, graph = bfs_class_count(fm, start, goal)
        if n != brute_class_count(fm, graph, start, goal):
            mismatches.append(seed)
    elapsed = time.perf_counter() - t0
    ok = n_storage == 2 and n_gallery >= 4 and not mismatches and elapsed < 10.0
    _report(1, ok, f"storage={n_storage} gallery={n_gallery} mismatched seeds={mismatches} t={elapsed:.2f}s")


@pytest.mark.criterion(2, "decision: proposed picks the feature-rich class 10/10, AP the short one 10/10")
def test_c2_decision():
    prop_rich = ap_short = 0
    for seed in range(10):
        sc = storage_like(seed)
        w, cfg = sc.world(), sc.config()
        best, rep = plan(w, sc.start, sc.goal, cfg, sc.camera)
        ap, _ = plan_ap(w, sc.start, sc.goal, cfg, sc.camera)
        shortest = min(rep.candidates, key=lambda c: c.length)
        prop_rich += _south(best) and best.class_id != shortest.class_id
        ap_short += (not _south(ap)) and ap.class_id == shortest.class_id
    _report(2, prop_rich == 10 and ap_short == 10, f"proposed feature-rich {prop_rich}/10, AP shorter {ap_short}/10")


@pytest.mark.criterion(3, "error ordering over 20 noise seeds: median goal error and failure rate, < 60 s")
def test_c3_error_ordering(storage, storage_world):
    t0 = time.perf_counter()
    cfg = storage.config()
    prop, _ = plan(storage_world, storage.start, storage.goal, cfg, storage.camera)
    ap, _ = plan_ap(storage_world, storage.start, storage.goal, cfg, storage.camera)
    stats = {}
    for name, path in (("proposed", prop), ("ap", ap)):
        runs = [simulate(storage_world, storage.camera, path, noise_seed=s) for s in range(20)]
        # a run that loses tracking never reaches the goal: its goal error is unbounded
        errs = [math.inf if r.failed else r.goal_error for r in runs]
        stats[name] = (float(np.median(errs)), sum(r.failed for r in runs) / len(runs))
    elapsed = time.perf_counter() - t0
    (m_p, f_p), (m_a, f_a) = stats["proposed"], stats["ap"]
    ok = m_p < m_a and f_a >= f_p and elapsed < 60.0
    _report(3, ok, f"median proposed={m_p:.4f} m ap={m_a} failure proposed={f_p:.2f} ap={f_a:.2f} t={elapsed:.1f}s")


@pytest.mark.criterion(4, "FIM: finite differences on 1000 pairs, PSD, rank <= 2, exact sigma scaling")
def test_c4_fim():
    worst, bad_psd, bad_rank, bad_scale = 0.0, 0, 0, 0
    for l_w, pose in random_pairs(1000):
        J = fd_jacobian(l_w, pose)
        F = fim_single(l_w, pose, 1.0)
        worst = max(worst, float(np.max(np.abs(F - J.T @ J))))
        ev = np.linalg.eigvalsh(F)
        bad_psd += ev.min() < -1e-9 * max(1.0, ev.max())
        bad_rank += np.linalg.matrix_rank(F, tol=1e-9 * max(1.0, ev.max())) > 2
        for s in (0.01, 0.5, 2.0):
            bad_scale += not np.allclose(fim_single(l_w, pose, s), F / s**2, rtol=1e-12, atol=0)
    ok = worst <= 1e-5 and not (bad_psd or bad_rank or bad_scale)
    _report(4, ok, f"max |diff|={worst:.2e} psd violations={bad_psd} rank>2={bad_rank} scaling={bad_scale}")


@pytest.mark.criterion(5, "DP equals exhaustive enumeration on 100 graphs, identical tie-break")
def test_c5_dp():
    rng = np.random.default_rng(5)
    agree = 0
    for k in range(100):
        g = _random_graph(rng, integer=bool(k % 2))  # integer weights force ties
        lam_d, lam_p = (1.0, float(len(g.layers))) if k % 2 else tuple(rng.uniform(0, 2, size=2))
        cost, idx = _oracle(g, lam_d, lam_p)
        try:
            r = solve_dp(g, lam_d, lam_p)
        except NoFeasibleChainError:
            agree += idx is None
            continue
        agree += idx is not None and r.indices == idx and abs(r.cost - cost) <= 1e-9
    _report(5, agree == 100, f"{agree}/100 agree")


@pytest.mark.criterion(6, "segmentation contract on 50 random worlds")
def test_c6_segmentation():
    eta, l_min = 0.5, 0.5
    n_seg = violations = 0
    for seed in range(50):
        sc, fm, classes = random_feature_world(seed)
        for ip in classes[:2]:
            segs = extract_segments(fm, sc.camera, ip, eta=eta, l_min=l_min)
            bound = depth_bound(ip.length, l_min)
            for s in segs:
                n_seg += 1
                vs, ve = vis_candidates(fm, sc.camera, s.p_start), vis_candidates(fm, sc.camera, s.p_end)
                good = (covis_ratio(vs, ve) >= eta or s.length <= l_min + 1e-12) and s.depth <= bound and s.covis == vs & ve
                violations += not good
    _report(6, violations == 0 and n_seg > 0, f"{n_seg} segments, {violations} violations")


@pytest.mark.criterion(7, "ESDF equals brute force on fixtures up to 32x32")
def test_c7_esdf(storage_world):
    rng = np.random.default_rng(7)
    fixtures = [rng.random((int(rng.integers(1, 33)), int(rng.integers(1, 33)))) < p for p in rng.uniform(0.02, 0.6, 300)]
    fixtures += [np.eye(32, dtype=bool), np.ones((32, 32), bool), np.pad(np.ones((1, 1), bool), 15)]
    bad = 0
    for mask in fixtures:
        if not mask.any():
            continue
        bad += not np.array_equal(build_esdf(extrude(mask), 0.5).esdf2d, brute_esdf(mask))
    _report(7, bad == 0, f"{len(fixtures)} fixtures, {bad} mismatches")


@pytest.mark.criterion(8, "runtime: proposed planner on the 12x10 m, 0.1 m storage world < 5 s")
def test_c8_runtime(storage, storage_world):
    t0 = time.perf_counter()
    plan(storage_world, storage.start, storage.goal, storage.config(), storage.camera)
    first = time.perf_counter() - t0
    t0 = time.perf_counter()
    plan(storage_world, storage.start, storage.goal, storage.config(), storage.camera)
    second = time.perf_counter() - t0
    assert storage_world.occupancy.shape[:2] == (120, 100)
    _report(8, second < 5.0, f"first call {first:.2f}s, steady state {second:.2f}s")


@pytest.mark.criterion(9, "determinism: plan and benchmark CSVs byte-identical across runs")
def test_c9_determinism(tmp_path):
    sc = tmp_path / "storage.json"
    storage_like(0).save(sc)
    for run in ("a", "b"):
        assert cli_main(["plan", str(sc), "--seed", "4", "--out", str(tmp_path / run / "plan"), "--no-timings"]) == 0
        assert cli_main(["benchmark", str(sc), "--planners", "proposed,ap,rrt300", "--runs", "3", "--seeds", "1,2,3",
                         "--out", str(tmp_path / run / "bench"), "--no-timings"]) == 0
    differ = []
    for sub in ("plan", "bench"):
        for f in sorted((tmp_path / "a" / sub).glob("*.csv")):
            if f.read_bytes() != (tmp_path / "b" / sub / f.name).read_bytes():
                differ.append(f"{sub}/{f.name}")
    _report(9, not differ, f"differing files: {differ}")


def _non_collinear(L):
    return len(L) >= 3 and np.linalg.matrix_rank(L - L.mean(axis=0), tol=1e-9) >= 2


@pytest.mark.criterion(10, "noiseless localisation within 1e-6 m with >= 3 non-collinear landmarks")
def test_c10_noiseless(storage, storage_world):
    cfg = storage.config()
    fm = build_esdf(storage_world, storage.start.z)
    prop, _ = plan(storage_world, storage.start, storage.goal, cfg, storage.camera)
    ap, _ = plan_ap(storage_world, storage.start, storage.goal, cfg, storage.camera)
    rng = np.random.default_rng(10)
    worst, checked = 0.0, 0
    for path in (prop, ap):
        for n in path.nodes:
            x = np.array([n.pose.x, n.pose.y, n.pose.z, n.pose.psi])
            L = storage_world.landmark_pos[visible_mask(fm, storage.camera, x[:3], x[3])]
            if not _non_collinear(L):
                continue
            meas = noisy_bearings(camera_frame(L, x[:3], x[3]), 0.0, rng)
            init = x + np.r_[rng.uniform(-0.1, 0.1, 3), rng.uniform(-0.05, 0.05)]
            est, _ = estimate_pose(L, meas, init, 0.0)
            worst = max(worst, float(np.linalg.norm(est[:3] - x[:3])))
            checked += 1
    run = simulate(storage_world, storage.camera, prop, noise_seed=0, sigma=0.0)
    worst = max(worst, float(np.nanmax(run.errors)))
    ok = checked > 0 and worst <= 1e-6 and not run.failed
    _report(10, ok, f"{checked} poses re-estimated, worst error {worst:.2e} m")
