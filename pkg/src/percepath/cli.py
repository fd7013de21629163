"""``percepath`` command line: plan, benchmark, gen-world, render."""

import argparse
import csv
import logging
import math
import os
import sys
import time

import numpy as np

from .baselines import get_planner, plan_ap
from .errors import PercepathError, PlanningError, SpecError
from .path_select import plan, topological_classes
from .render import render_svg
from .scenario import TEMPLATES, Scenario, load
from .vo_sim import BENCH_COLUMNS, DETAIL_COLUMNS, benchmark
from .world_map import Box, FaceLandmarks, Pose4, build_esdf

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INPUT, EXIT_PLANNING = 0, 1, 2
TIMING_STAGES = ("esdf", "topology", "classes", "total")


class InputError(PercepathError):
    """Bad command-line flags."""


def fmt(v):
    """CSV cell: 9 significant digits, empty for missing values."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return f"{v:.9g}"
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) for x in r])


def read_waypoints(path):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return np.zeros((0, 3))
    try:
        return np.array([[float(r["x"]), float(r["y"]), float(r["z"])] for r in rows])
    except (KeyError, ValueError) as exc:
        raise SpecError(f"malformed waypoint row ({exc})", field="x,y,z", source=str(path)) from None


def _config(scenario, seed):
    cfg = scenario.config()
    return cfg.with_overrides(seed=seed) if seed is not None else cfg


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_plan(args):
    sc = load(args.scenario)
    world = sc.world()
    cfg = _config(sc, args.seed)
    os.makedirs(args.out, exist_ok=True)
    t0 = time.perf_counter()
    try:
        if args.planner == "proposed":
            best, report = plan(world, sc.start, sc.goal, cfg, sc.camera)
        elif args.planner == "ap":
            best, report = plan_ap(world, sc.start, sc.goal, cfg, sc.camera)
        else:
            try:
                fn = get_planner(args.planner)
            except KeyError:
                raise InputError(f"--planner: unknown planner {args.planner!r}") from None
            best, report = fn(world, sc.start, sc.goal, cfg, sc.camera), None
    except PlanningError as exc:
        raise PlanningError(f"{args.scenario}: {exc}") from None
    elapsed = time.perf_counter() - t0

    write_csv(
        os.path.join(args.out, "waypoints.csv"),
        ("x", "y", "z", "psi", "logdet"),
        ([n.pose.x, n.pose.y, n.pose.z, n.pose.psi, n.logdet_I] for n in best.nodes),
    )
    cands = report.candidates if report is not None else [best]
    write_csv(
        os.path.join(args.out, "candidates.csv"),
        ("class_id", "d", "c_p_min", "q", "selected"),
        ([c.class_id, c.length, c.c_p_min, c.q, c is best] for c in cands),
    )
    timings = report.timings if report is not None else {"total": elapsed}
    write_csv(
        os.path.join(args.out, "timing.csv"),
        ("stage", "seconds"),
        ([s, None if args.no_timings else timings.get(s)] for s in TIMING_STAGES if s in timings),
    )
    if report is not None:
        featmap, classes, gvd = report.featmap, report.classes, report.gvd
    else:
        z_ref = cfg.z_ref if cfg.z_ref is not None else sc.start.z
        featmap, classes, gvd = build_esdf(world, z_ref), [], None
    svg = render_svg(featmap, classes, best.positions, gvd, sc.start, sc.goal, title=sc.name or "plan")
    with open(os.path.join(args.out, "plan.svg"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
    print(f"class {best.class_id}: length {best.length:.3f} m, {len(best.nodes)} waypoints -> {args.out}")
    return EXIT_OK


def _parse_seeds(text, runs):
    if text is None:
        return list(range(runs))
    try:
        if ":" in text:
            a, b = (int(x) for x in text.split(":"))
            seeds = list(range(a, b))
        else:
            seeds = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"--seeds: expected 'a,b,c' or 'start:stop', got {text!r}") from None
    if len(seeds) < runs:
        raise InputError(f"--seeds: {len(seeds)} seeds given for --runs {runs}")
    return seeds


def cmd_benchmark(args):
    if args.runs < 1:
        raise InputError("--runs: must be >= 1")
    names = [n.strip() for n in args.planners.split(",") if n.strip()]
    if not names:
        raise InputError("--planners: empty list")
    planners = {}
    for n in names:
        try:
            planners[n] = get_planner(n)
        except KeyError:
            raise InputError(f"--planners: unknown planner {n!r}") from None
    seeds = _parse_seeds(args.seeds, args.runs)
    sc = load(args.scenario)
    world = sc.world()
    summary, detail = benchmark(world, sc.start, sc.goal, planners, args.runs, seeds, sc.config(), sc.camera)
    if args.no_timings:
        for row in summary + detail:
            row["time"] = None
    os.makedirs(args.out, exist_ok=True)
    write_csv(os.path.join(args.out, "summary.csv"), BENCH_COLUMNS, ([r[c] for c in BENCH_COLUMNS] for r in summary))
    write_csv(os.path.join(args.out, "runs.csv"), DETAIL_COLUMNS, ([r[c] for c in DETAIL_COLUMNS] for r in detail))
    for r in summary:
        print(f"{r['planner']:>10}: length {fmt(r['length'])} m, goal error {fmt(r['goal_error'])} m, success {fmt(r['success'])}")
    return EXIT_OK


def _floats(text, n, flag):
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        vals = ()
    if len(vals) not in n:
        raise InputError(f"{flag}: expected {' or '.join(map(str, n))} comma-separated numbers, got {text!r}")
    return vals


def _face(text):
    try:
        box, face, density = text.split(":")
        return FaceLandmarks(int(box), face, float(density))
    except ValueError:
        raise InputError(f"--face: expected BOX:FACE:DENSITY, got {text!r}") from None


def cmd_genworld(args):
    custom = args.size is not None or args.box or args.face or args.start is not None or args.goal is not None
    if args.template and custom:
        raise InputError("--template: cannot be combined with --size/--box/--face/--start/--goal")
    if args.template:
        sc = TEMPLATES[args.template](seed=args.seed, resolution=args.resolution)
    else:
        missing = [f for f in ("size", "start", "goal") if getattr(args, f) is None]
        if missing:
            raise InputError(f"--{missing[0]}: required without --template")
        W, H, Z = _floats(args.size, (3,), "--size")
        res = args.resolution
        boxes = []
        for b in args.box:
            v = _floats(b, (6,), "--box")
            boxes.append(Box(v[:3], v[3:]))
        start = Pose4(*_floats(args.start, (3, 4), "--start"))
        goal = Pose4(*_floats(args.goal, (3, 4), "--goal"))
        sc = Scenario(
            dims=(round(W / res), round(H / res), round(Z / res)), resolution=res, origin=(0.0, 0.0, 0.0),
            obstacles=boxes, start=start, goal=goal, faces=[_face(f) for f in args.face],
            landmark_seed=args.seed, name=args.name or "custom",
        )
    sc.source = args.out
    sc.world()  # validate before writing
    sc.save(args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_render(args):
    sc = load(args.scenario)
    world = sc.world()
    cfg = sc.config()
    z_ref = cfg.z_ref if cfg.z_ref is not None else sc.start.z
    featmap = build_esdf(world, z_ref)
    try:
        classes, gvd, _ = topological_classes(featmap, sc.start, sc.goal, cfg)
    except PlanningError as exc:
        raise PlanningError(f"{args.scenario}: {exc}") from None
    waypoints = read_waypoints(args.waypoints) if args.waypoints else None
    svg = render_svg(featmap, classes, waypoints, gvd, sc.start, sc.goal, title=sc.name or "plan")
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
    print(f"wrote {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="percepath", description="Perception-aware topological path planning.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("plan", help="plan one path and export CSV + SVG")
    sp.add_argument("scenario")
    sp.add_argument("--planner", default="proposed", help="proposed, ap, rrt or rrtN")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--no-timings", action="store_true", help="leave timing cells empty (byte-stable output)")
    sp.set_defaults(func=cmd_plan)

    sb = sub.add_parser("benchmark", help="plan and fly each planner over several seeds")
    sb.add_argument("scenario")
    sb.add_argument("--planners", default="proposed,ap")
    sb.add_argument("--runs", type=int, default=10)
    sb.add_argument("--seeds", default=None, help="comma list or start:stop; default 0..runs-1")
    sb.add_argument("--out", required=True, help="output directory")
    sb.add_argument("--no-timings", action="store_true")
    sb.set_defaults(func=cmd_benchmark)

    sg = sub.add_parser("gen-world", help="write a scenario file")
    sg.add_argument("--template", choices=sorted(TEMPLATES))
    sg.add_argument("--seed", type=int, default=0)
    sg.add_argument("--resolution", type=float, default=0.1)
    sg.add_argument("--size", help="W,H,Z in metres")
    sg.add_argument("--box", action="append", default=[], help="x0,y0,z0,x1,y1,z1 (repeatable)")
    sg.add_argument("--face", action="append", default=[], help="BOX:FACE:DENSITY, e.g. 0:+y:2.5 (repeatable)")
    sg.add_argument("--start", help="x,y,z[,psi]")
    sg.add_argument("--goal", help="x,y,z[,psi]")
    sg.add_argument("--name", default=None)
    sg.add_argument("--out", required=True, help="scenario path")
    sg.set_defaults(func=cmd_genworld)

    sr = sub.add_parser("render", help="re-render the SVG for a scenario and saved waypoints")
    sr.add_argument("scenario")
    sr.add_argument("--waypoints", help="waypoints.csv written by 'plan'")
    sr.add_argument("--out", required=True, help="SVG path")
    sr.set_defaults(func=cmd_render)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PlanningError as exc:
        print(f"planning failed: {exc}", file=sys.stderr)
        return EXIT_PLANNING
    except (PercepathError, ValueError, OSError) as exc:
        if isinstance(exc, OSError):
            msg = f"{exc.filename}: {exc.strerror}" if exc.filename else str(exc)
        elif isinstance(exc, InputError):
            msg = f"command line: {exc}"
        else:
            msg = str(exc)
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
