"""Scenario files (UTF-8 JSON) and the built-in world templates."""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .config import PlannerConfig
from .errors import SpecError
from .world_map import (
    Box,
    CameraModel,
    FaceLandmarks,
    GridWorld,
    Landmark,
    Pose4,
    WorldSpec,
    _snap_to_surface,
    generate_world,
)

VERSION = "percepath.scenario/1"

_TOP_KEYS = {"version", "name", "grid", "obstacles", "landmarks", "start", "goal", "camera", "planner"}
_REQUIRED = ("version", "grid", "start", "goal")


@dataclass
class Scenario:
    dims: tuple
    resolution: float
    origin: tuple
    obstacles: list
    start: Pose4
    goal: Pose4
    camera: CameraModel = field(default_factory=CameraModel)
    faces: list = field(default_factory=list)
    landmark_seed: int = 0
    explicit: list | None = None  # [(id, (x, y, z))]
    planner: dict = field(default_factory=dict)
    name: str = ""
    source: str | None = field(default=None, compare=False)

    def config(self):
        return PlannerConfig.from_dict(self.planner, source=self.source)

    def world_spec(self):
        return WorldSpec(
            dims=self.dims, resolution=self.resolution, origin=self.origin,
            boxes=list(self.obstacles), faces=[] if self.explicit is not None else list(self.faces),
            start=(self.start.x, self.start.y, self.start.z),
            goal=(self.goal.x, self.goal.y, self.goal.z),
        )

    def world(self):
        try:
            w = generate_world(self.world_spec(), self.landmark_seed)
        except SpecError as exc:
            raise exc.located(self.source) from None
        if self.explicit is None:
            return w
        origin = np.array(self.origin, dtype=float)
        lms = []
        for n, (lid, pos) in enumerate(self.explicit):
            vox = _snap_to_surface(w.occupancy, origin, self.resolution, np.array(pos, dtype=float), np.zeros(3))
            if vox is None:
                raise SpecError("no occupied voxel within one cell", field=f"landmarks.explicit[{n}]", source=self.source)
            lms.append(Landmark(int(lid), tuple(float(v) for v in pos), vox))
        try:
            return GridWorld(w.occupancy, w.resolution, w.origin, lms)
        except SpecError as exc:
            raise exc.located(self.source) from None

    def to_dict(self):
        d = {
            "version": VERSION,
            "name": self.name,
            "grid": {"dims": list(self.dims), "resolution": self.resolution, "origin": list(self.origin)},
            "obstacles": [{"min": list(b.min), "max": list(b.max)} for b in self.obstacles],
        }
        if self.explicit is not None:
            d["landmarks"] = {"explicit": [{"id": i, "pos": list(p)} for i, p in self.explicit]}
        else:
            d["landmarks"] = {
                "faces": [{"box": f.box, "face": f.face, "density": f.density} for f in self.faces],
                "seed": self.landmark_seed,
            }
        d["start"] = _pose_dict(self.start)
        d["goal"] = _pose_dict(self.goal)
        c = self.camera
        d["camera"] = {"hfov": c.hfov, "vfov": c.vfov, "range_max": c.range_max, "sigma": c.sigma}
        d["planner"] = dict(self.planner)
        return d

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())


def _pose_dict(p):
    return {"x": p.x, "y": p.y, "z": p.z, "psi": p.psi}


def _check_keys(obj, allowed, where, source, required=()):
    if not isinstance(obj, dict):
        raise SpecError("expected an object", field=where, source=source)
    for k in obj:
        if k not in allowed:
            raise SpecError(f"unknown key {k!r}", field=f"{where}.{k}" if where else k, source=source)
    for k in required:
        if k not in obj:
            raise SpecError("missing required key", field=f"{where}.{k}" if where else k, source=source)


def _vec(v, n, where, source, kind=float):
    if not isinstance(v, list) or len(v) != n:
        raise SpecError(f"expected a list of {n} numbers", field=where, source=source)
    try:
        out = tuple(kind(x) for x in v)
    except (TypeError, ValueError):
        raise SpecError("expected numbers", field=where, source=source) from None
    if any(isinstance(x, bool) for x in v) or not all(math.isfinite(x) for x in out):
        raise SpecError("expected finite numbers", field=where, source=source)
    return out


def _num(v, where, source):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SpecError("expected a number", field=where, source=source)
    return float(v)


def _pose(obj, where, source):
    _check_keys(obj, {"x", "y", "z", "psi"}, where, source, required=("x", "y", "z"))
    return Pose4(*(_num(obj.get(k, 0.0), f"{where}.{k}", source) for k in ("x", "y", "z", "psi")))


def parse(text, source=None):
    """Parse scenario JSON text; errors carry the file and field path."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}", source=source) from None
    _check_keys(doc, _TOP_KEYS, "", source, required=_REQUIRED)
    if doc["version"] != VERSION:
        raise SpecError(f"unsupported version {doc['version']!r} (expected {VERSION!r})", field="version", source=source)
    g = doc["grid"]
    _check_keys(g, {"dims", "resolution", "origin"}, "grid", source, required=("dims", "resolution"))
    dims = _vec(g["dims"], 3, "grid.dims", source, kind=int)
    if min(dims) < 1:
        raise SpecError("dims must be >= 1", field="grid.dims", source=source)
    res = _num(g["resolution"], "grid.resolution", source)
    if res <= 0:
        raise SpecError("must be > 0", field="grid.resolution", source=source)
    origin = _vec(g.get("origin", [0, 0, 0]), 3, "grid.origin", source)

    obstacles = []
    obs = doc.get("obstacles", [])
    if not isinstance(obs, list):
        raise SpecError("expected a list", field="obstacles", source=source)
    for n, o in enumerate(obs):
        w = f"obstacles[{n}]"
        _check_keys(o, {"min", "max"}, w, source, required=("min", "max"))
        obstacles.append(Box(_vec(o["min"], 3, f"{w}.min", source), _vec(o["max"], 3, f"{w}.max", source)))

    faces, seed, explicit = [], 0, None
    lm = doc.get("landmarks", {"faces": []})
    _check_keys(lm, {"faces", "seed", "explicit"}, "landmarks", source)
    if "explicit" in lm and ("faces" in lm or "seed" in lm):
        raise SpecError("give either 'explicit' or 'faces'/'seed'", field="landmarks", source=source)
    if "explicit" in lm:
        explicit = []
        for n, e in enumerate(lm["explicit"]):
            w = f"landmarks.explicit[{n}]"
            _check_keys(e, {"id", "pos"}, w, source, required=("id", "pos"))
            if isinstance(e["id"], bool) or not isinstance(e["id"], int):
                raise SpecError("expected an integer", field=f"{w}.id", source=source)
            explicit.append((e["id"], _vec(e["pos"], 3, f"{w}.pos", source)))
    else:
        for n, f in enumerate(lm.get("faces", [])):
            w = f"landmarks.faces[{n}]"
            _check_keys(f, {"box", "face", "density"}, w, source, required=("box", "face", "density"))
            if not isinstance(f["face"], str):
                raise SpecError("expected a string", field=f"{w}.face", source=source)
            faces.append(FaceLandmarks(int(_num(f["box"], f"{w}.box", source)), f["face"], _num(f["density"], f"{w}.density", source)))
        seed = lm.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise SpecError("expected an integer", field="landmarks.seed", source=source)

    cam = doc.get("camera", {})
    _check_keys(cam, {"hfov", "vfov", "range_max", "sigma"}, "camera", source)
    try:
        camera = CameraModel(**{k: _num(v, f"camera.{k}", source) for k, v in cam.items()})
    except SpecError as exc:
        raise exc.located(source) from None
    planner = doc.get("planner", {})
    if not isinstance(planner, dict):
        raise SpecError("expected an object", field="planner", source=source)
    try:
        PlannerConfig.from_dict(planner, source=source)
    except SpecError as exc:
        if exc.source is None:
            raise exc.located(source, "planner") from None
        raise
    except TypeError as exc:
        raise SpecError(str(exc), field="planner", source=source) from None

    return Scenario(
        dims=dims, resolution=res, origin=origin, obstacles=obstacles,
        start=_pose(doc["start"], "start", source), goal=_pose(doc["goal"], "goal", source),
        camera=camera, faces=faces, landmark_seed=seed, explicit=explicit,
        planner=dict(planner), name=str(doc.get("name", "")), source=source,
    )


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise SpecError(f"cannot read file: {exc.strerror}", source=str(path)) from None
    return parse(text, source=str(path))


# ---------------------------------------------------------------------------
# templates
# ---------------------------------------------------------------------------

def _outer_walls(W, H, Z, t=0.3):
    return [
        Box((0.0, 0.0, 0.0), (W, t, Z)),  # south
        Box((0.0, H - t, 0.0), (W, H, Z)),  # north
        Box((0.0, 0.0, 0.0), (t, H, Z)),  # west
        Box((W - t, 0.0, 0.0), (W, H, Z)),  # east
    ]


def storage_like(seed=0, resolution=0.1):
    """12 m x 10 m hall split by one wall; only the southern route is textured."""
    W, H, Z = 12.0, 10.0, 3.0
    t = 0.3
    boxes = [
        Box((0.0, 0.0, 0.0), (W, t, Z)),  # 0 south wall
        Box((0.0, H - t, 0.0), (W, H, Z)),  # 1 north wall
        Box((0.0, 0.0, 0.0), (t, 4.6, Z)),  # 2 west wall, south half
        Box((0.0, 4.6, 0.0), (t, H, Z)),  # 3 west wall, north half
        Box((W - t, 0.0, 0.0), (W, 4.6, Z)),  # 4 east wall, south half
        Box((W - t, 4.6, 0.0), (W, H, Z)),  # 5 east wall, north half
        Box((3.0, 4.6, 0.0), (9.0, 5.4, Z)),  # 6 separating wall
        Box((4.0, t, 0.0), (5.0, 1.3, 2.0)),  # 7, 8 crates against the south wall
        Box((7.0, t, 0.0), (8.0, 1.3, 2.0)),
    ]
    faces = [
        FaceLandmarks(0, "+y", 3.0),
        FaceLandmarks(6, "-y", 3.0),
        FaceLandmarks(2, "+x", 3.0),
        FaceLandmarks(4, "-x", 3.0),
        FaceLandmarks(7, "+y", 4.0),
        FaceLandmarks(8, "+y", 4.0),
        FaceLandmarks(7, "-x", 4.0),
        FaceLandmarks(8, "+x", 4.0),
    ]
    return Scenario(
        dims=(round(W / resolution), round(H / resolution), round(Z / resolution)),
        resolution=resolution, origin=(0.0, 0.0, 0.0), obstacles=boxes,
        start=Pose4(1.5, 6.5, 1.5, 0.0), goal=Pose4(10.5, 6.5, 1.5, 0.0),
        faces=faces, landmark_seed=seed, name="storage-like",
    )


def gallery_like(seed=0, resolution=0.1):
    """22 m x 20 m gallery with four display blocks; textured west and north walls."""
    W, H, Z = 22.0, 20.0, 3.0
    boxes = _outer_walls(W, H, Z) + [
        Box((5.0, 4.0, 0.0), (9.0, 8.0, Z)),
        Box((5.0, 12.0, 0.0), (9.0, 16.0, Z)),
        Box((13.0, 4.0, 0.0), (17.0, 8.0, Z)),
        Box((13.0, 12.0, 0.0), (17.0, 16.0, Z)),
    ]
    faces = [
        FaceLandmarks(2, "+x", 3.0),
        FaceLandmarks(1, "-y", 3.0),
        FaceLandmarks(0, "+y", 1.0),
        FaceLandmarks(3, "-x", 1.0),
        FaceLandmarks(5, "+y", 2.0),
        FaceLandmarks(7, "+y", 2.0),
        FaceLandmarks(4, "-y", 1.0),
        FaceLandmarks(6, "-y", 1.0),
        FaceLandmarks(4, "-x", 1.0),
        FaceLandmarks(5, "-x", 1.0),
        FaceLandmarks(6, "+x", 1.0),
        FaceLandmarks(7, "+x", 1.0),
    ]
    return Scenario(
        dims=(round(W / resolution), round(H / resolution), round(Z / resolution)),
        resolution=resolution, origin=(0.0, 0.0, 0.0), obstacles=boxes,
        start=Pose4(2.0, 10.0, 1.5, 0.0), goal=Pose4(20.0, 10.0, 1.5, 0.0),
        faces=faces, landmark_seed=seed, name="gallery-like",
    )


TEMPLATES = {"storage-like": storage_like, "gallery-like": gallery_like}
