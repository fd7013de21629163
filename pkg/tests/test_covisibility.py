import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from percepath.covisibility import covis_ratio, depth_bound, densify, extract_segments, vis_candidates
from percepath.world_map import CameraModel, GridWorld, Landmark, build_esdf

from oracles import random_feature_world

CAM = CameraModel()


def _line_world(lm_x=(), wall=False, length=24):
    """Long free corridor, landmarks on a post column at the given x positions."""
    occ = np.zeros((length, 9, 5), bool)
    lms = []
    for n, x in enumerate(lm_x):
        occ[x, 6, :] = True
        lms.append(Landmark(n, (x + 0.5, 6.0, 2.5), (x, 6, 2)))
    if wall:
        occ[3, 0:9, :] = True
    return build_esdf(GridWorld(occ, 1.0, landmarks=lms), 2.5)


def test_vis_candidates_empty():
    assert vis_candidates(_line_world(), CAM, (5.5, 3.5, 2.5)) == frozenset()


def test_vis_candidates_ahead():
    assert vis_candidates(_line_world([7]), CAM, (5.5, 6.0, 2.5)) == {0}


def test_vis_candidates_occluded():
    assert vis_candidates(_line_world([1], wall=True), CAM, (5.5, 6.0, 2.5)) == frozenset()


def test_vis_candidates_ignore_yaw():
    # behind the camera still counts: the candidate set is yaw-free
    assert vis_candidates(_line_world([4]), CAM, (6.5, 6.0, 2.5)) == {0}


def test_covis_ratio_examples():
    assert covis_ratio({1, 2, 3}, {2, 3, 4}) == 0.5
    assert covis_ratio({5, 6}, {5, 6}) == 1.0
    assert covis_ratio({1}, {2}) == 0.0
    assert covis_ratio(set(), set()) == 0.0


_ids = st.frozensets(st.integers(0, 30), max_size=12)


@given(_ids, _ids)
def test_covis_ratio_properties(a, b):
    r = covis_ratio(a, b)
    assert r == covis_ratio(b, a)
    assert 0.0 <= r <= 1.0
    if a:
        assert covis_ratio(a, a) == 1.0


def test_densify_spacing():
    pts = np.array([[0.0, 0, 0], [3.0, 0, 0], [3.0, 4.0, 0]])
    d = densify(pts, 0.7)
    assert np.allclose(d[0], pts[0]) and np.allclose(d[-1], pts[-1])
    assert np.max(np.linalg.norm(np.diff(d, axis=0), axis=1)) <= 0.7 + 1e-12


def _straight(x0, x1, y=3.0):
    return np.array([[x0, y, 2.5], [x1, y, 2.5]])


def test_all_visible_single_segment():
    fm = _line_world([10, 11, 12])
    segs = extract_segments(fm, CAM, _straight(9.5, 13.5), eta=0.5, l_min=0.5)
    assert len(segs) == 1
    assert segs[0].covis == {0, 1, 2}


def test_landmarks_near_goal_split():
    fm = _line_world([20, 21, 22, 23], length=26)
    path = _straight(1.5, 21.5)
    segs = extract_segments(fm, CAM, path, eta=0.5, l_min=0.5)
    assert len(segs) > 1
    for s in segs:
        cr = covis_ratio(vis_candidates(fm, CAM, s.p_start), vis_candidates(fm, CAM, s.p_end))
        assert cr >= 0.5 or s.length <= 0.5 + 1e-12
    # feature-free stretch is cut down to l_min
    assert min(s.length for s in segs) <= 0.5


def test_short_path_single_segment():
    fm = _line_world([20])
    segs = extract_segments(fm, CAM, _straight(1.5, 1.9), eta=0.9, l_min=0.5)
    assert len(segs) == 1


def _check_tiling(segs, path_len):
    assert segs[0].s_start == 0.0
    assert segs[-1].s_end == pytest.approx(path_len)
    for a, b in zip(segs[:-1], segs[1:]):
        assert a.s_end == b.s_start
        assert np.array_equal(a.p_end, b.p_start)
        assert np.array_equal(a.arc[-1], b.arc[0])


@pytest.fixture(scope="module")
def random_worlds():
    return [random_feature_world(seed) for seed in range(50)]


def test_segmentation_contract(random_worlds):
    eta, l_min = 0.5, 0.5
    for sc, fm, classes in random_worlds:
        cam = sc.camera
        for ip in classes[:2]:
            segs = extract_segments(fm, cam, ip, eta=eta, l_min=l_min)
            _check_tiling(segs, ip.length)
            bound = depth_bound(ip.length, l_min)
            for s in segs:
                vs, ve = vis_candidates(fm, cam, s.p_start), vis_candidates(fm, cam, s.p_end)
                assert covis_ratio(vs, ve) >= eta or s.length <= l_min + 1e-12
                assert s.covis == vs & ve
                assert s.depth <= bound


def test_lower_eta_never_adds_segments(random_worlds):
    for sc, fm, classes in random_worlds[:10]:
        ip = classes[0]
        counts = [len(extract_segments(fm, sc.camera, ip, eta=e, l_min=0.5)) for e in (0.9, 0.6, 0.3, 0.0)]
        assert counts == sorted(counts, reverse=True)
        assert counts[-1] == 1


def test_depth_bound_values():
    assert depth_bound(0.4, 0.5) == 0
    assert depth_bound(20.0, 0.5) == math.ceil(math.log2(40)) + 1
