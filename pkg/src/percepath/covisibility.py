"""Visibility candidate sets, co-visibility ratios and path segmentation."""

import math
from dataclasses import dataclass

import numpy as np

from .world_map import visible_mask


@dataclass(frozen=True)
class PathSegment:
    p_start: np.ndarray
    p_end: np.ndarray
    covis: frozenset
    arc: np.ndarray  # (k, 3) sub-polyline, p_start first
    s_start: float  # arc-length stations along the parent path
    s_end: float
    depth: int = 0

    @property
    def length(self):
        return self.s_end - self.s_start


def vis_candidates(featmap, cam, p):
    """Landmark ids in range and vertical FoV of ``p`` and not occluded."""
    world = featmap.world
    if not world.landmarks:
        return frozenset()
    mask = visible_mask(featmap, cam, np.asarray(p, dtype=float), psi=None)
    return frozenset(int(i) for i in world.landmark_ids[mask])


def covis_ratio(v_p, v_q):
    """|V_p & V_q| / |V_p | V_q|, defined as 0 when both sets are empty."""
    union = len(v_p | v_q)
    if union == 0:
        return 0.0
    return len(v_p & v_q) / union


def densify(points, spacing):
    """Insert points so consecutive vertices are at most ``spacing`` apart."""
    pts = np.asarray(points, dtype=float)
    out = [pts[:1]]
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(1, int(math.ceil(np.linalg.norm(b - a) / spacing - 1e-12)))
        t = (np.arange(1, n + 1) / n)[:, None]
        out.append(a + t * (b - a))
    return np.concatenate(out, axis=0)


def depth_bound(length, l_min):
    """Maximum bisection depth reached by :func:`extract_segments`."""
    if length <= l_min:
        return 0
    return math.ceil(math.log2(length / l_min)) + 1


def extract_segments(featmap, cam, path, eta=0.5, l_min=0.5, spacing=None):
    """Split a path by recursive arc-length bisection.

    A sub-path stops splitting once its endpoints reach co-visibility ratio
    ``eta`` or its length drops to ``l_min``. ``path`` is an InitialPath or a
    (k, 3) array of points.
    """
    pts = getattr(path, "points", path)
    if spacing is None:
        spacing = min(featmap.world.resolution, l_min / 2)
    pts = densify(pts, spacing)
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    cache = {}

    def V(i):
        if i not in cache:
            cache[i] = vis_candidates(featmap, cam, pts[i])
        return cache[i]

    out = []
    stack = [(0, len(pts) - 1, 0)]
    while stack:
        i0, i1, depth = stack.pop()
        seg_len = s[i1] - s[i0]
        cr = covis_ratio(V(i0), V(i1))
        if cr >= eta or seg_len <= l_min or i1 - i0 < 2:
            out.append(PathSegment(
                p_start=pts[i0], p_end=pts[i1], covis=V(i0) & V(i1), arc=pts[i0:i1 + 1],
                s_start=float(s[i0]), s_end=float(s[i1]), depth=depth,
            ))
            continue
        half = 0.5 * (s[i0] + s[i1])
        mid = i0 + 1 + int(np.argmin(np.abs(s[i0 + 1:i1] - half)))
        # pop order keeps segments in path order
        stack.append((mid, i1, depth + 1))
        stack.append((i0, mid, depth + 1))
    return out
