"""SVG rendering of a plan: obstacles, GVD, every homology class and the selected path."""

from xml.sax.saxutils import quoteattr

import numpy as np

PX_PER_M = 40.0
_CLASS_COLOURS = ("#4c72b0", "#dd8452", "#55a868", "#8172b3", "#937860", "#da8bc3", "#8c8c8c", "#ccb974", "#64b5cd")


def _runs(mask):
    """Horizontal runs ``(i, j0, j1)`` of True cells in a 2D mask indexed [x, y]."""
    out = []
    # rows along x for a fixed y keep the SVG small for wall-like obstacles
    for j in range(mask.shape[1]):
        col = mask[:, j]
        if not col.any():
            continue
        edges = np.flatnonzero(np.diff(np.concatenate(([0], col.astype(np.int8), [0]))))
        for a, b in zip(edges[::2], edges[1::2]):
            out.append((j, int(a), int(b)))
    return out


class _Canvas:
    def __init__(self, origin, extent):
        self.ox, self.oy = float(origin[0]), float(origin[1])
        self.w, self.h = float(extent[0]), float(extent[1])
        self.items = []

    def xy(self, x, y):
        return (x - self.ox) * PX_PER_M, (self.oy + self.h - y) * PX_PER_M

    def rect(self, x0, y0, x1, y1, cls):
        px0, py1 = self.xy(x0, y1)
        self.items.append(
            f'<rect class="{cls}" x="{px0:.2f}" y="{py1:.2f}" '
            f'width="{(x1 - x0) * PX_PER_M:.2f}" height="{(y1 - y0) * PX_PER_M:.2f}"/>'
        )

    def polyline(self, pts, cls, style, extra=""):
        coords = " ".join("{:.2f},{:.2f}".format(*self.xy(p[0], p[1])) for p in pts)
        self.items.append(f'<polyline class="{cls}"{extra} points="{coords}" style={quoteattr(style)}/>')

    def circle(self, x, y, r, cls, style):
        px, py = self.xy(x, y)
        self.items.append(f'<circle class="{cls}" cx="{px:.2f}" cy="{py:.2f}" r="{r:.2f}" style={quoteattr(style)}/>')

    def svg(self, title):
        W, H = self.w * PX_PER_M, self.h * PX_PER_M
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0f}" height="{H:.0f}" '
            f'viewBox="0 0 {W:.2f} {H:.2f}">\n'
            f"<title>{title}</title>\n"
            "<style>.obstacle{fill:#333}.gvd{fill:#9ecae1}</style>\n"
            f'<rect class="background" x="0" y="0" width="{W:.2f}" height="{H:.2f}" style="fill:#fff"/>\n'
        )
        return head + "\n".join(self.items) + "\n</svg>\n"


def render_svg(featmap, classes=(), selected=None, gvd=None, start=None, goal=None, title="plan"):
    """SVG text for the planning slice.

    ``classes`` is a sequence of ``InitialPath``; ``selected`` an ``(n, >=2)`` array of
    waypoints drawn on top in a distinct style.
    """
    world = featmap.world
    res = world.resolution
    origin = np.asarray(world.origin, dtype=float)
    canvas = _Canvas(origin, np.asarray(world.occupancy.shape[:2]) * res)

    def cell_rects(mask, cls):
        for j, a, b in _runs(mask):
            canvas.rect(origin[0] + a * res, origin[1] + j * res, origin[0] + b * res, origin[1] + (j + 1) * res, cls)

    cell_rects(featmap.slice_occupancy, "obstacle")
    if gvd is not None:
        cell_rects(np.asarray(gvd, dtype=bool), "gvd")
    for p in world.landmark_pos:
        canvas.circle(p[0], p[1], 1.5, "landmark", "fill:#e6550d")
    for k, ip in enumerate(classes):
        colour = _CLASS_COLOURS[k % len(_CLASS_COLOURS)]
        canvas.polyline(ip.points, "class", f"fill:none;stroke:{colour};stroke-width:2;stroke-dasharray:6,4",
                        extra=f' data-class-id="{ip.class_id}"')
    if selected is not None and len(selected):
        canvas.polyline(np.asarray(selected), "selected", "fill:none;stroke:#c00;stroke-width:4")
    if start is not None:
        canvas.circle(start.x, start.y, 6, "start", "fill:#2ca02c")
    if goal is not None:
        canvas.circle(goal.x, goal.y, 6, "goal", "fill:#d62728")
    return canvas.svg(title)
