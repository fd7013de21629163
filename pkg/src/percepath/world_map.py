"""Voxel world, 2D distance field, raycast visibility and landmark embedding.

Grid indexing is x-major: ``occupancy[i, j, k]`` is the cell whose centre is
``origin + (i + 0.5, j + 0.5, k + 0.5) * resolution``.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _accel
from .errors import BoundsError, SpecError

# esdf value for cells when the slice holds no obstacle at all
ESDF_EMPTY = float(np.finfo(np.float64).max)

_FACE_AXES = {"x": 0, "y": 1, "z": 2}


def wrap_angle(a):
    """Map an angle (scalar or array) to (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + math.pi, 2 * math.pi) - math.pi
    w = np.where(w <= -math.pi, w + 2 * math.pi, w)
    if np.ndim(w) == 0:
        return float(w)
    return w


@dataclass(frozen=True)
class Pose4:
    x: float
    y: float
    z: float
    psi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "psi", wrap_angle(self.psi))

    @property
    def position(self):
        return np.array([self.x, self.y, self.z], dtype=float)


@dataclass(frozen=True)
class CameraModel:
    hfov: float = 1.5
    vfov: float = 1.0
    range_max: float = 6.0
    sigma: float = 0.01

    def __post_init__(self):
        if not 0 < self.hfov < 2 * math.pi:
            raise SpecError("must lie in (0, 2*pi)", field="camera.hfov")
        if not 0 < self.vfov < math.pi:
            raise SpecError("must lie in (0, pi)", field="camera.vfov")
        if self.range_max <= 0:
            raise SpecError("must be > 0", field="camera.range_max")
        if not self.sigma > 0:
            raise SpecError("must be > 0", field="camera.sigma")


@dataclass(frozen=True)
class Landmark:
    id: int
    pos_w: tuple
    voxel: tuple


@dataclass(frozen=True)
class Box:
    min: tuple
    max: tuple


@dataclass(frozen=True)
class FaceLandmarks:
    box: int
    face: str
    density: float


@dataclass
class WorldSpec:
    """Procedural world: axis-aligned boxes plus landmark densities per face."""

    dims: tuple
    resolution: float
    origin: tuple = (0.0, 0.0, 0.0)
    boxes: list = field(default_factory=list)
    faces: list = field(default_factory=list)
    start: tuple | None = None
    goal: tuple | None = None


class GridWorld:
    """Dense boolean occupancy grid with embedded landmarks. Immutable."""

    def __init__(self, occupancy, resolution, origin=(0.0, 0.0, 0.0), landmarks=()):
        occ = np.array(occupancy, dtype=np.bool_, copy=True)
        if occ.ndim != 3 or min(occ.shape) < 1:
            raise SpecError("occupancy must be a non-empty 3D array", field="grid.dims")
        if not resolution > 0:
            raise SpecError("must be > 0", field="grid.resolution")
        occ.setflags(write=False)
        self.occupancy = occ
        self.dims = tuple(int(d) for d in occ.shape)
        self.resolution = float(resolution)
        self.origin = np.array(origin, dtype=float)
        self.origin.setflags(write=False)
        self.landmarks = tuple(landmarks)
        ids = [lm.id for lm in self.landmarks]
        if len(set(ids)) != len(ids):
            raise SpecError("landmark ids must be unique", field="landmarks")
        upper = self.origin + np.array(self.dims) * self.resolution
        for lm in self.landmarks:
            p = np.asarray(lm.pos_w, dtype=float)
            if np.any(p < self.origin) or np.any(p > upper):
                raise SpecError(f"landmark {lm.id} lies outside the grid", field="landmarks")
            if not self.occupancy[tuple(lm.voxel)]:
                raise SpecError(f"landmark {lm.id} embedded in a free voxel", field="landmarks")

    @property
    def extent(self):
        return np.array(self.dims) * self.resolution

    @cached_property
    def landmark_pos(self):
        a = np.array([lm.pos_w for lm in self.landmarks], dtype=float).reshape(-1, 3)
        a.setflags(write=False)
        return a

    @cached_property
    def landmark_vox(self):
        a = np.array([lm.voxel for lm in self.landmarks], dtype=np.int64).reshape(-1, 3)
        a.setflags(write=False)
        return a

    @cached_property
    def landmark_ids(self):
        a = np.array([lm.id for lm in self.landmarks], dtype=np.int64)
        a.setflags(write=False)
        return a

    @cached_property
    def id_to_index(self):
        return {int(i): n for n, i in enumerate(self.landmark_ids)}

    def cell_center(self, idx):
        return self.origin + (np.asarray(idx, dtype=float) + 0.5) * self.resolution

    def to_grid(self, p):
        """World metres -> continuous grid units."""
        return (np.asarray(p, dtype=float) - self.origin) / self.resolution

    def contains(self, p):
        g = self.to_grid(p)
        return bool(np.all(g >= 0) and np.all(g < np.array(self.dims)))

    def cell_of(self, p):
        if not self.contains(p):
            raise BoundsError(f"point {tuple(np.round(p, 6))} lies outside the grid")
        g = np.floor(self.to_grid(p)).astype(int)
        return tuple(int(v) for v in g)

    def z_index(self, z):
        k = math.floor((z - self.origin[2]) / self.resolution)
        if not 0 <= k < self.dims[2]:
            raise BoundsError(f"height {z} lies outside the grid z-extent")
        return k

    def is_free(self, p):
        return self.contains(p) and not self.occupancy[self.cell_of(p)]


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Occlusion-aware feature map: world + ESDF of the flight slice."""

    world: GridWorld
    z_ref: float
    esdf2d: np.ndarray
    k_ref: int

    @property
    def slice_occupancy(self):
        return self.world.occupancy[:, :, self.k_ref]

    def clearance_at(self, xy):
        """ESDF value (m) at the slice cell containing ``xy``; 0 outside the grid."""
        w = self.world
        xy = np.atleast_2d(np.asarray(xy, dtype=float))[:, :2]
        g = np.floor((xy - w.origin[:2]) / w.resolution).astype(int)
        inside = (g[:, 0] >= 0) & (g[:, 1] >= 0) & (g[:, 0] < w.dims[0]) & (g[:, 1] < w.dims[1])
        out = np.zeros(len(xy))
        out[inside] = self.esdf2d[g[inside, 0], g[inside, 1]]
        return out


def build_esdf(world, z_ref):
    """Exact 2D Euclidean distance transform of the slice at ``z_ref``."""
    k = world.z_index(z_ref)
    occ = world.occupancy[:, :, k]
    d2, _, _ = _accel.edt_2d(occ)
    if not occ.any():
        esdf = np.full(occ.shape, ESDF_EMPTY)
    else:
        esdf = np.sqrt(d2) * world.resolution
    esdf.setflags(write=False)
    return FeatureMap(world=world, z_ref=float(z_ref), esdf2d=esdf, k_ref=k)


def raycast(world, start, end):
    """First occupied cell strictly between the cells of ``start`` and ``end``.

    Returns the cell index tuple or ``None``.
    """
    for p in (start, end):
        if not world.contains(p):
            raise BoundsError(f"ray endpoint {tuple(np.round(p, 6))} lies outside the grid")
    hit = _accel.first_hits(world.occupancy, world.to_grid(start), world.to_grid(end)[None])[0]
    if hit[0] < 0:
        return None
    return tuple(int(v) for v in hit)


def camera_frame(l_w, pos, psi):
    """Landmark(s) in the camera frame: x right, y up, z forward (yaw only)."""
    d = np.asarray(l_w, dtype=float) - np.asarray(pos, dtype=float)
    c, s = math.cos(psi), math.sin(psi)
    x = d[..., 0] * s - d[..., 1] * c
    z = d[..., 0] * c + d[..., 1] * s
    return np.stack([x, d[..., 2], z], axis=-1)


def unoccluded(world, pos, lm_index):
    """Raycast test towards each landmark's embedding voxel.

    A hit on the voxel's 26-neighbourhood still counts as reaching it.
    """
    lm_index = np.asarray(lm_index, dtype=np.int64)
    if lm_index.size == 0:
        return np.zeros(0, dtype=bool)
    vox = world.landmark_vox[lm_index]
    targets = vox + 0.5
    hits = _accel.first_hits(world.occupancy, world.to_grid(pos), targets)
    none = hits[:, 0] < 0
    near = np.max(np.abs(hits - vox), axis=1) <= 1
    return none | near


def visible_mask(featmap, cam, pos, psi=None, subset=None):
    """Visibility of landmarks from ``pos``.

    With ``psi=None`` the horizontal field of view is ignored (yaw-free
    candidate test). ``subset`` restricts the test to given landmark indices;
    the returned mask is aligned with it.
    """
    world = featmap.world
    idx = np.arange(len(world.landmarks)) if subset is None else np.asarray(subset, dtype=np.int64)
    ok = angular_mask(world.landmark_pos[idx], pos, cam, psi)
    if ok.any():
        cand = idx[ok]
        ok[ok] = unoccluded(world, pos, cand)
    return ok


def angular_mask(l_w, pos, cam, psi=None):
    """Range and field-of-view filter (no occlusion)."""
    d = np.asarray(l_w, dtype=float) - np.asarray(pos, dtype=float)
    horiz = np.hypot(d[:, 0], d[:, 1])
    dist = np.hypot(horiz, d[:, 2])
    ok = (dist <= cam.range_max) & (dist > 0)
    ok &= np.abs(np.arctan2(d[:, 2], horiz)) <= cam.vfov / 2
    if psi is not None:
        az = wrap_angle(np.arctan2(d[:, 1], d[:, 0]) - psi)
        ok &= np.abs(az) <= cam.hfov / 2
    return ok


def visible(featmap, cam, pose, lm):
    """Full visibility of a single landmark from a 4-DoF pose."""
    world = featmap.world
    i = world.id_to_index[lm.id]
    return bool(visible_mask(featmap, cam, pose.position, pose.psi, subset=[i])[0])


def _voxelize(dims, resolution, origin, boxes):
    occ = np.zeros(dims, dtype=np.bool_)
    centers = [origin[a] + (np.arange(dims[a]) + 0.5) * resolution for a in range(3)]
    for b in boxes:
        sel = []
        for a in range(3):
            c = centers[a]
            sel.append((c >= b.min[a]) & (c <= b.max[a]))
        occ[np.ix_(sel[0], sel[1], sel[2])] = True
    return occ


def _snap_to_surface(occ, origin, resolution, pos, normal):
    dims = np.array(occ.shape)
    inward = (np.asarray(pos) - origin) / resolution - 0.5 * np.asarray(normal)
    cell = np.floor(inward).astype(int)
    if np.all(cell >= 0) and np.all(cell < dims) and occ[tuple(cell)]:
        return tuple(int(v) for v in cell)
    base = np.floor((np.asarray(pos) - origin) / resolution).astype(int)
    best, best_d = None, math.inf
    for off in np.ndindex(3, 3, 3):
        c = base + np.array(off) - 1
        if np.any(c < 0) or np.any(c >= dims) or not occ[tuple(c)]:
            continue
        d = np.linalg.norm(origin + (c + 0.5) * resolution - pos)
        if d < best_d - 1e-12:
            best, best_d = tuple(int(v) for v in c), d
    return best


def generate_world(spec, seed):
    """Voxelise ``spec`` and scatter landmarks on the requested box faces."""
    dims = tuple(int(d) for d in spec.dims)
    if len(dims) != 3 or min(dims) < 1:
        raise SpecError("dims must be three positive integers", field="grid.dims")
    res = float(spec.resolution)
    if not res > 0:
        raise SpecError("must be > 0", field="grid.resolution")
    origin = np.array(spec.origin, dtype=float)
    boxes = [b if isinstance(b, Box) else Box(tuple(b[0]), tuple(b[1])) for b in spec.boxes]
    for n, b in enumerate(boxes):
        if any(lo >= hi for lo, hi in zip(b.min, b.max)):
            raise SpecError("min must be < max on every axis", field=f"obstacles[{n}]")
    occ = _voxelize(dims, res, origin, boxes)
    upper = origin + np.array(dims) * res

    rng = np.random.default_rng(seed)
    landmarks = []
    for n, fs in enumerate(spec.faces):
        if not 0 <= fs.box < len(boxes):
            raise SpecError(f"box index {fs.box} out of range", field=f"landmarks.faces[{n}].box")
        if len(fs.face) != 2 or fs.face[0] not in "+-" or fs.face[1] not in _FACE_AXES:
            raise SpecError(f"bad face {fs.face!r}", field=f"landmarks.faces[{n}].face")
        if fs.density < 0:
            raise SpecError("must be >= 0", field=f"landmarks.faces[{n}].density")
        b = boxes[fs.box]
        axis = _FACE_AXES[fs.face[1]]
        sign = 1.0 if fs.face[0] == "+" else -1.0
        other = [a for a in range(3) if a != axis]
        lo = np.clip(np.array(b.min, dtype=float), origin, upper)
        hi = np.clip(np.array(b.max, dtype=float), origin, upper)
        area = float(np.prod(hi[other] - lo[other]))
        count = int(round(area * fs.density))
        if count == 0:
            continue
        pts = np.empty((count, 3))
        pts[:, axis] = b.max[axis] if sign > 0 else b.min[axis]
        for a in other:
            pts[:, a] = rng.uniform(lo[a], hi[a], size=count)
        normal = np.zeros(3)
        normal[axis] = sign
        for p in pts:
            if np.any(p < origin) or np.any(p > upper):
                raise SpecError("landmark face lies outside the grid", field=f"landmarks.faces[{n}]")
            vox = _snap_to_surface(occ, origin, res, p, normal)
            if vox is None:
                raise SpecError("no occupied voxel next to face", field=f"landmarks.faces[{n}]")
            landmarks.append(Landmark(len(landmarks), tuple(float(v) for v in p), vox))

    world = GridWorld(occ, res, origin, landmarks)
    for name in ("start", "goal"):
        p = getattr(spec, name)
        if p is None:
            continue
        if not world.contains(p[:3]):
            raise SpecError("lies outside the grid", field=name)
        if world.occupancy[world.cell_of(p[:3])]:
            raise SpecError("lies inside an obstacle", field=name)
    return world
