import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from skimage.morphology import thin

from percepath.config import PlannerConfig
from percepath.errors import DisconnectedError, EmptyGVDError, InfeasibleError
from percepath.path_select import topological_classes
from percepath.topo_graph import (
    build_graph,
    connect_endpoints,
    enumerate_classes,
    extract_gvd,
    gvd_components,
    gvd_mask,
    h_signature,
    obstacle_representatives,
)
from percepath.world_map import Pose4, build_esdf

from conftest import extrude
from oracles import bfs_class_count, brute_class_count, random_class_world


def _fm(mask, res=1.0):
    return build_esdf(extrude(mask, resolution=res), 0.5 * res)


# -- GVD ---------------------------------------------------------------------------

def test_empty_slice_raises():
    with pytest.raises(EmptyGVDError, match="straight"):
        extract_gvd(_fm(np.zeros((8, 8), bool)))


def test_two_walls_give_midline():
    m = np.zeros((30, 11), bool)
    m[:, 0] = m[:, 10] = True
    gvd = extract_gvd(_fm(m))
    for x in range(6, 24):
        ys = np.flatnonzero(gvd[x])
        assert len(ys) >= 1 and np.all(np.abs(ys - 5) <= 1)


def test_single_box_loop_is_bisector():
    m = np.zeros((40, 40), bool)
    m[17:23, 17:23] = True
    fm = _fm(m)
    gvd = extract_gvd(fm)
    # one closed curve with the box inside it
    assert gvd_components(gvd) == 1
    from scipy import ndimage
    outside, n = ndimage.label(~gvd)
    assert n == 2
    assert outside[20, 20] != outside[0, 0]
    # brute-force nearest-two-obstacle labelling: every skeleton cell lies within one
    # cell of the box/border bisector, and one step moves the difference by <= 1 + sqrt(2)
    box = np.argwhere(m)
    for c in np.argwhere(gvd):
        d_box = np.sqrt(((box - c) ** 2).sum(axis=1)).min()
        d_border = min(c[0] + 1, c[1] + 1, 40 - c[0], 40 - c[1])
        assert abs(d_box - d_border) <= 1 + math.sqrt(2)


def test_storage_has_two_corridors(storage_world, storage):
    fm = build_esdf(storage_world, 1.5)
    gvd = extract_gvd(fm, 0.3)
    col = np.flatnonzero(gvd[60])  # x = 6 m, middle of the separating wall
    y = (col + 0.5) * storage_world.resolution
    assert np.any(y > 5.4) and np.any(y < 4.6)


def test_gvd_clearance(storage_world):
    fm = build_esdf(storage_world, 1.5)
    gvd = extract_gvd(fm, 0.3)
    assert np.all(fm.esdf2d[gvd] >= 0.3 - 1e-12)


@pytest.mark.parametrize("seed", range(15))
def test_thinning_preserves_components(seed):
    fm, _, _ = random_class_world(seed)
    band = gvd_mask(fm, 0.3)
    assert gvd_components(thin(band)) == gvd_components(band)
    assert np.array_equal(extract_gvd(fm, 0.3), thin(band))


# -- graph -----------------------------------------------------------------------------

def test_straight_segment():
    gvd = np.zeros((14, 5), bool)
    gvd[2:12, 2] = True
    g = build_graph(gvd)
    assert sorted(g.vertices) == [(2, 2), (11, 2)]
    assert len(g.edges) == 1 and g.edges[0].length == pytest.approx(9.0)


def test_t_shape():
    gvd = np.zeros((15, 15), bool)
    gvd[2:13, 7] = True
    gvd[7, 7:13] = True
    g = build_graph(gvd)
    assert len(g.vertices) == 4
    # the junction cluster is represented by its highest-count cell
    junction = [v for v in g.vertices if len(g.adjacency[g.vertices.index(v)]) == 3]
    assert len(junction) == 1 and max(abs(junction[0][0] - 7), abs(junction[0][1] - 7)) <= 1
    assert len(g.edges) == 3


def test_ring_gets_self_loop():
    m = np.zeros((20, 20), bool)
    m[4:16, 4:16] = True
    m[6:14, 6:14] = False
    ring = thin(m)
    g = build_graph(ring)
    assert len(g.vertices) == 1
    assert len(g.edges) == 1 and g.edges[0].a == g.edges[0].b == 0


def test_edges_are_eight_connected_and_bidirectional():
    fm, start, goal = random_class_world(3)
    g = build_graph(extract_gvd(fm, 0.3))
    for eid, e in enumerate(g.edges):
        steps = np.abs(np.diff(e.cells, axis=0)).max(axis=1)
        assert np.all(steps == 1)
        assert tuple(e.cells[0]) == g.vertices[e.a] and tuple(e.cells[-1]) == g.vertices[e.b]
        assert eid in g.adjacency[e.a] and eid in g.adjacency[e.b]


def _u_world():
    m = np.zeros((21, 21), bool)
    m[0, 0] = True  # far away obstacle so the slice has an ESDF
    fm = _fm(m)
    gvd = np.zeros_like(m)
    gvd[7, 10:15] = True
    gvd[7:14, 14] = True
    gvd[13, 10:15] = True
    return fm, build_graph(gvd)


def test_connect_tie_break_lower_index():
    fm, g = _u_world()
    out = connect_endpoints(g, fm, Pose4(10.5, 10.5, 0.5), Pose4(10.5, 16.5, 0.5))
    link = [e for e in out.edges if out.start in (e.a, e.b)]
    assert len(link) == 1
    end = link[0].oriented(out.start)[-1]
    assert tuple(end) == (7, 10)


def test_connect_adjacent_start():
    fm, g = _u_world()
    out = connect_endpoints(g, fm, Pose4(10.5, 15.5, 0.5), Pose4(10.5, 11.5, 0.5))
    link = [e for e in out.edges if out.start in (e.a, e.b)][0]
    assert link.length == pytest.approx(1.0)


def test_connect_closed_room():
    m = np.zeros((30, 30), bool)
    m[5:15, 5] = m[5:15, 14] = True
    m[5, 5:15] = m[14, 5:15] = True
    fm = _fm(m)
    g = build_graph(extract_gvd(fm))
    with pytest.raises(DisconnectedError):
        connect_endpoints(g, fm, Pose4(9.5, 9.5, 0.5), Pose4(25.5, 25.5, 0.5))


def test_connect_start_in_collision():
    m = np.zeros((20, 20), bool)
    m[8:12, 8:12] = True
    fm = _fm(m)
    g = build_graph(extract_gvd(fm))
    with pytest.raises(InfeasibleError, match="start"):
        connect_endpoints(g, fm, Pose4(9.5, 9.5, 0.5), Pose4(1.5, 1.5, 0.5))


# -- H-signatures and classes ----------------------------------------------------------

def test_winding_example():
    obs = np.array([[0.0, 0.0]])
    up = h_signature([(-5, 0), (0, 3), (5, 0)], obs)
    down = h_signature([(-5, 0), (0, -3), (5, 0)], obs)
    assert up[0] == pytest.approx(-math.pi)
    assert down[0] == pytest.approx(math.pi)
    assert down[0] - up[0] == pytest.approx(2 * math.pi)


def test_homotopic_detours_share_signature():
    obs = np.array([[0.0, 0.0]])
    a = h_signature([(-5, 0), (0, 3), (5, 0)], obs)
    b = h_signature([(-5, 0), (-2, 6), (3, 4), (5, 0)], obs)
    assert np.allclose(a, b, atol=1e-12)


_pt = st.tuples(st.floats(-10, 10), st.floats(-10, 10))


@settings(max_examples=200, deadline=None)
@given(st.lists(_pt, min_size=2, max_size=12), st.lists(_pt, min_size=1, max_size=4))
def test_signature_refinement_invariance(points, obstacles):
    pts = np.array(points)
    obs = np.array(obstacles)
    # keep every segment away from the obstacle points
    for a, b in zip(pts[:-1], pts[1:]):
        ab = b - a
        t = np.clip(((obs - a) @ ab) / max(ab @ ab, 1e-12), 0, 1)
        if np.min(np.linalg.norm(a + t[:, None] * ab - obs, axis=1)) < 1e-3:
            return
    fine = np.empty((2 * len(pts) - 1, 2))
    fine[0::2] = pts
    fine[1::2] = 0.5 * (pts[:-1] + pts[1:])
    assert np.max(np.abs(h_signature(fine, obs) - h_signature(pts, obs))) <= 1e-9


def _classes(scn, cfg=None):
    fm = build_esdf(scn.world(), scn.start.z)
    classes, _, _ = topological_classes(fm, scn.start, scn.goal, cfg or PlannerConfig())
    return fm, classes


def test_storage_two_classes(storage):
    _, classes = _classes(storage)
    assert len(classes) == 2


def test_gallery_at_least_four_classes(gallery):
    _, classes = _classes(gallery)
    assert len(classes) >= 4


def test_class_properties(gallery):
    fm, classes = _classes(gallery)
    for a in classes:
        assert np.all(fm.esdf2d[a.cells[:, 0], a.cells[:, 1]] >= 0.3 - 1e-12)
        assert np.allclose(a.points[0, :2], [gallery.start.x, gallery.start.y])
        assert np.allclose(a.points[-1, :2], [gallery.goal.x, gallery.goal.y])
        for b in classes:
            if a is not b:
                assert np.max(np.abs(a.hsig - b.hsig)) >= math.pi
    lengths = [c.length for c in classes]
    assert lengths == sorted(lengths)
    assert lengths[-1] <= 3.0 * lengths[0] + 1e-9


def test_max_classes_limit(gallery):
    _, classes = _classes(gallery, PlannerConfig(max_classes=3))
    assert [c.class_id for c in classes] == [0, 1, 2]


def test_obstacle_reps_inside_components(storage_world):
    fm = build_esdf(storage_world, 1.5)
    reps = obstacle_representatives(fm)
    assert len(reps) == 2  # outer walls with crates, separating wall
    cells = np.floor(reps / storage_world.resolution).astype(int)
    assert np.all(fm.slice_occupancy[cells[:, 0], cells[:, 1]])


@pytest.mark.parametrize("seed", range(20))
def test_class_count_matches_brute_force(seed):
    fm, start, goal = random_class_world(seed)
    n, graph = bfs_class_count(fm, start, goal)
    assert n == brute_class_count(fm, graph, start, goal)
