"""Perception-aware topological path planning on voxel maps.

The pipeline builds a generalized Voronoi skeleton of a horizontal slice,
enumerates one path per homology class, splits every path into co-visible
segments, searches a layered pose graph scored by the log-determinant of the
landmark Fisher information, and picks the class that trades length against
the weakest segment.
"""

from ._accel import BACKEND, HAVE_NUMBA
from .baselines import get_planner, plan_ap, plan_rrtstar
from .config import PlannerConfig
from .errors import (
    BoundsError,
    DegenerateLandmarkError,
    DisconnectedError,
    EmptyGVDError,
    InfeasibleError,
    LayerStarvationError,
    NoFeasibleChainError,
    PercepathError,
    PlanningError,
    SpecError,
)
from .path_select import PlannedPath, PlanReport, plan
from .scenario import Scenario, gallery_like, load, parse, storage_like
from .vo_sim import benchmark, simulate
from .world_map import (
    Box,
    CameraModel,
    FaceLandmarks,
    GridWorld,
    Landmark,
    Pose4,
    WorldSpec,
    build_esdf,
    generate_world,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "HAVE_NUMBA", "BoundsError", "Box", "CameraModel", "DegenerateLandmarkError",
    "DisconnectedError", "EmptyGVDError", "FaceLandmarks", "GridWorld", "InfeasibleError", "Landmark",
    "LayerStarvationError", "NoFeasibleChainError", "PercepathError", "PlanReport", "PlannedPath",
    "PlannerConfig", "PlanningError", "Pose4", "Scenario", "SpecError", "WorldSpec", "benchmark",
    "build_esdf", "gallery_like", "generate_world", "get_planner", "load", "parse", "plan", "plan_ap",
    "plan_rrtstar", "simulate", "storage_like",
]
