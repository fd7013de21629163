"""Exception hierarchy shared by all planner stages."""


class PercepathError(Exception):
    """Base class for every error raised by this package."""


class BoundsError(PercepathError, ValueError):
    """A point or height lies outside the grid."""


class SpecError(PercepathError, ValueError):
    """A procedural world or scenario description is inconsistent."""

    def __init__(self, message, field=None, source=None):
        self.message = message
        self.field = field
        self.source = source
        prefix = ""
        if source:
            prefix += f"{source}: "
        if field:
            prefix += f"{field}: "
        super().__init__(prefix + message)

    def located(self, source, prefix=""):
        """Copy of this error attributed to ``source`` with ``prefix`` on the field path."""
        field = self.field
        if prefix:
            field = f"{prefix}.{field}" if field else prefix
        return SpecError(self.message, field=field, source=source)


class PlanningError(PercepathError):
    """Planning could not produce a path."""


class EmptyGVDError(PlanningError):
    """The slice holds no obstacles, so no Voronoi skeleton exists."""


class InfeasibleError(PlanningError):
    """Start or goal is in collision or too close to an obstacle."""


class DisconnectedError(PlanningError):
    """No free path joins start and goal."""


class LayerStarvationError(PlanningError):
    """A pose-graph layer received no collision-free samples."""


class NoFeasibleChainError(PlanningError):
    """Yaw gating leaves no chain of nodes from the first to the last layer."""


class DegenerateLandmarkError(PercepathError, ValueError):
    """A landmark coincides with the camera centre."""
