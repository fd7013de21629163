"""Planner configuration with the simulation defaults."""

import math
from dataclasses import asdict, dataclass, fields, replace

from .errors import SpecError


@dataclass(frozen=True)
class PlannerConfig:
    # segment extraction
    eta: float = 0.5
    l_min: float = 0.5
    # pose graph
    v_nom: float = 0.4
    Ts: float = 1.0
    n_samples: int = 10
    R_sample: float = 0.4
    yaw_rate_lim: float = 0.3
    lambda_d: float = 0.1
    lambda_p: float = 1.0
    # selection
    c_p_thr: float = 6.0
    eta_d: float = 0.2
    eta_p: float = 1.5
    # plumbing
    epsilon: float = 1e-9
    logdet_floor: float = -60.0
    clearance_min: float = 0.3
    yaw_count: int | None = None
    max_classes: int = 10
    max_depth: int = 64
    max_length_factor: float = 3.0
    max_expansions: int = 200_000
    z_ref: float | None = None
    seed: int = 0
    # RRT* baseline
    rrt_samples: int = 1000
    rrt_step: float = 0.5
    rrt_rewire_radius: float = 2.0
    rrt_goal_bias: float = 0.05

    def __post_init__(self):
        for name in ("lambda_d", "lambda_p", "eta_d", "eta_p"):
            if getattr(self, name) < 0:
                raise SpecError("weight must be >= 0", field=name)
        if not math.isfinite(self.c_p_thr):
            raise SpecError("must be finite", field="c_p_thr")
        if not 0.0 <= self.eta <= 1.0:
            raise SpecError("must lie in [0, 1]", field="eta")
        for name in ("l_min", "v_nom", "Ts", "yaw_rate_lim", "epsilon", "rrt_step"):
            if getattr(self, name) <= 0:
                raise SpecError("must be > 0", field=name)
        if self.R_sample < 0 or self.clearance_min < 0:
            raise SpecError("must be >= 0", field="R_sample/clearance_min")
        if self.n_samples < 1 or self.max_classes < 1:
            raise SpecError("must be >= 1", field="n_samples/max_classes")
        if self.yaw_count is not None and self.yaw_count < 1:
            raise SpecError("must be >= 1", field="yaw_count")

    @property
    def step_length(self):
        return self.v_nom * self.Ts

    @property
    def yaw_gate(self):
        return self.yaw_rate_lim * self.Ts

    @property
    def n_yaw(self):
        if self.yaw_count is not None:
            return self.yaw_count
        return math.ceil(2 * math.pi / self.yaw_gate)

    def with_overrides(self, **kw):
        return replace(self, **kw)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data, source=None):
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise SpecError(f"unknown key {key!r}", field=f"planner.{key}", source=source)
        return cls(**data)
