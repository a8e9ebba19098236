#!/usr/bin/env python3
"""
Batch front-end: stable placements, teaching, detection experiments,
planning and the end-to-end demo.

Exit codes: 0 success, 2 input / geometry error, 3 planning failure,
4 detection failure.
"""
import argparse
import json
import logging
import os
import sys

import numpy as np
from rich import box
from rich.panel import Panel
from rich.table import Table

from deskasm.config import AppConfig, load_profile
from deskasm.errors import DeskAsmError, NoPathError, StageError
from deskasm.logs import console, setup_logging
from deskasm.mesh import load_mesh
from deskasm.pipeline import ROLES, detect_scene, detection_trials, plan_assembly, run_report, simulate_teaching
from deskasm.placement import placements_to_json, stable_placements
from deskasm.reports import PrecisionReport, pose_row
from deskasm.robot import load_robot
from deskasm.scene import load_meshes, load_scene
from deskasm.teaching import load_recording, load_teaching_record, save_teaching_record, teach

logger = logging.getLogger("deskasm.cli")

DEMO_SCENE = os.path.join(os.path.dirname(os.path.abspath(__file__)), "scenes", "demo.json")


# ---------------------------------------------------------------- helpers
def write_json(path: str, data) -> None:
    """Sorted keys, fixed indentation: identical inputs give identical bytes."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def load_config(args) -> AppConfig:
    cfg = load_profile(args.config)
    if args.mode is not None:
        mode = "literal" if args.mode == "literal" else "yaw-invariant"
        cfg = cfg.model_copy(update={"placement": cfg.placement.model_copy(update={"mode": mode})})
    return cfg


def emit(args, data, table: Table | None = None) -> None:
    """Machine-readable JSON on stdout with --json, a rich table otherwise."""
    if args.json:
        sys.stdout.write(json.dumps(data, indent=2, sort_keys=True) + "\n")
    elif table is not None:
        console.print(table)


class Timings:
    """Collects per-node elapsed times from executor events."""
    def __init__(self):
        self.rows: list[tuple[str, str, float]] = []

    def __call__(self, event: str, payload: dict) -> None:
        if event == "node.start":
            console.log(f"[dim]▶ {payload['id']}[/]")
        elif event == "node.done":
            self.rows.append((payload["id"], payload["stage"], payload["elapsed"]))

    def table(self) -> Table:
        t = Table(title="stage timings", box=box.ROUNDED, border_style="dim cyan")
        t.add_column("node", style="cyan")
        t.add_column("stage")
        t.add_column("seconds", justify="right")
        for node, stage, sec in self.rows:
            t.add_row(node, stage, f"{sec:.2f}")
        t.add_row("total", "", f"{sum(r[2] for r in self.rows):.2f}", style="bold")
        return t


# ---------------------------------------------------------------- commands
def cmd_placements(args) -> int:
    cfg = load_config(args)
    mesh = load_mesh(args.mesh, args.scale)
    placements = stable_placements(mesh, cfg.placement.margin_fraction, cfg.placement.cluster_angle_tol)
    data = {"mesh": os.path.basename(args.mesh), "placements": placements_to_json(placements)}
    t = Table(title=f"stable placements: {os.path.basename(args.mesh)}", box=box.ROUNDED)
    for name in ("#", "support normal", "height mm", "margin mm"):
        t.add_column(name, justify="right")
    for i, p in enumerate(placements):
        t.add_row(str(i), str(np.round(p.normal, 3).tolist()), f"{p.support_height * 1000:.2f}",
                  f"{p.margin * 1000:.2f}")
    emit(args, data, t)
    if args.out_dir:
        write_json(os.path.join(args.out_dir, "placements.json"), data)
    return 0


def _teaching_report(record) -> PrecisionReport:
    report = PrecisionReport("teaching precision")
    if record.truth is None:
        return report
    truth = record.truth.to_pose()
    for i, s in enumerate(record.samples):
        report.add(pose_row(f"frame {i}", s.relative.to_pose(), truth, "sample"))
    report.add(pose_row("aggregate", record.relative, truth, "aggregate"))
    return report


def cmd_teach(args) -> int:
    if args.recording is None and args.simulate is None:
        console.print("[bold red]Error:[/] teach needs a recording or --simulate SCENE")
        return 2
    if args.simulate is not None:
        scene = load_scene(args.simulate)
        seed = scene.seed if args.seed is None else args.seed
        record = simulate_teaching(scene, load_meshes(scene), args.frames, args.orientations,
                                   args.pixel_sigma, seed=seed)
    else:
        record = teach(load_recording(args.recording))
    out = args.output or os.path.join(args.out_dir or ".", "teaching_record.json")
    save_teaching_record(record, out)
    logger.info("teaching record written to %s", out)

    report = _teaching_report(record)
    data = {"record": out, "relativePose": record.relative_pose.model_dump(),
            "approach": record.approach, "retractionDistance": record.retraction_distance,
            "report": report.to_dict() if report.rows else None}
    emit(args, data, report.table() if report.rows else None)
    if args.out_dir and report.rows:
        write_json(os.path.join(args.out_dir, "teaching_report.json"), report.to_dict())
    return 0


def cmd_detect(args) -> int:
    cfg = load_config(args)
    scene = load_scene(args.scene)
    meshes = load_meshes(scene)
    seed = scene.seed if args.seed is None else args.seed
    names = [args.object] if args.object else [o.name for o in scene.objects]
    for name in names:
        if name not in meshes:
            console.print(f"[bold red]Error:[/] scene has no object '{name}'")
            return 2
    detections = detect_scene(scene, meshes, names, cfg, seed)
    reports = {}
    for name in names:
        entry = detections[name]
        report = detection_trials(scene, meshes, name, cfg, seed)
        reports[name] = {"detection": entry, "trials": report.to_dict()}
        if not args.json:
            pos = np.round(entry["correctedPose"]["t"], 4).tolist()
            console.print(Panel(f"rmse {entry['icpRmse']:.2g} m, {entry['outlierCount']} outlier(s), "
                                f"corrected position {pos}", title=f"scene detection: {name}"))
            console.print(report.table())
        if report.failures:
            logger.warning("%s: %d trial(s) without a detection: %s", name, len(report.failures), report.failures)
    emit(args, reports)
    if args.out_dir:
        write_json(os.path.join(args.out_dir, "detection_report.json"), reports)
    return 0


def _run_plan(args, record) -> int:
    cfg = load_config(args)
    scene = load_scene(args.scene)
    seed = scene.seed if args.seed is None else args.seed
    timings = Timings()
    state = plan_assembly(scene, load_meshes(scene), load_robot(scene.robot), record, cfg, seed, timings)
    report = run_report(state)

    out = args.out_dir or "out"
    write_json(os.path.join(out, "trajectory.json"), state["motion"].trajectory.to_dict())
    for role in ROLES:
        write_json(os.path.join(out, f"plan_{role.lower()}.json"), state["plans"][role].to_dict())
        g = state["graphs"][role]
        if g is not None:
            write_json(os.path.join(out, f"graph_{role.lower()}.json"), g.to_dict())
    write_json(os.path.join(out, "report.json"), report)

    if args.json:
        emit(args, report)
    else:
        console.print(timings.table())
        traj = report["trajectory"]
        console.print(Panel(f"{traj['segments']} segment(s), {traj['waypoints']} waypoint(s), "
                            f"re-check min clearance {report['recheck']['minClearance']}",
                            title="trajectory", border_style="green"))
    logger.info("outputs written to %s", out)
    return 0


def cmd_plan(args) -> int:
    return _run_plan(args, load_teaching_record(args.record))


def cmd_run_demo(args) -> int:
    args.scene = args.scene or DEMO_SCENE
    args.config = args.config or "demo"
    if args.record:
        record = load_teaching_record(args.record)
    else:
        scene = load_scene(args.scene)
        seed = scene.seed if args.seed is None else args.seed
        record = simulate_teaching(scene, load_meshes(scene), seed=seed)
        out = args.out_dir or "out"
        os.makedirs(out, exist_ok=True)
        save_teaching_record(record, os.path.join(out, "teaching_record.json"))
    return _run_plan(args, record)


# ---------------------------------------------------------------- arguments
def parse_args(argv=None):
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="Profile name under profiles/ or a JSON file path")
    common.add_argument("--seed", type=int, default=None, help="Override the scene seed")
    common.add_argument("--json", action="store_true", help="Machine-readable output on stdout")
    common.add_argument("--out-dir", default=None, help="Directory for JSON outputs")
    common.add_argument("--mode", choices=("literal", "corrected"), default=None,
                        help="Placement correction: literal full-rotation distance or yaw-invariant")
    common.add_argument("--debug", action="store_true", help="Enable debug logging")

    parser = argparse.ArgumentParser(description="Desk-scale teaching and assembly planner")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("placements", parents=[common], help="Stable placements of a mesh")
    p.add_argument("mesh")
    p.add_argument("--scale", type=float, default=1.0, help="Unit scale applied on load")
    p.set_defaults(func=cmd_placements)

    p = sub.add_parser("teach", parents=[common], help="Teaching record from marker observations")
    p.add_argument("recording", nargs="?", default=None, help="Recording JSON (marker corners per frame)")
    p.add_argument("--simulate", default=None, metavar="SCENE", help="Simulate the recording from a scene")
    p.add_argument("--frames", type=int, default=20, help="Frames per simulated trial")
    p.add_argument("--orientations", type=int, default=5, help="Simulated trial orientations")
    p.add_argument("--pixel-sigma", type=float, default=0.5, help="Simulated corner noise in pixels")
    p.add_argument("-o", "--output", default=None, help="Teaching record path")
    p.set_defaults(func=cmd_teach)

    p = sub.add_parser("detect", parents=[common], help="Detection precision over table quarters")
    p.add_argument("--scene", required=True)
    p.add_argument("--object", default=None, help="Only this scene object")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("plan", parents=[common], help="Detect, plan and re-check the assembly")
    p.add_argument("--scene", required=True)
    p.add_argument("--record", required=True, help="Teaching record JSON")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("run-demo", parents=[common], help="Simulated teaching plus the full plan")
    p.add_argument("--scene", default=None, help="Defaults to scenes/demo.json")
    p.add_argument("--record", default=None, help="Use this teaching record instead of simulating one")
    p.set_defaults(func=cmd_run_demo)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    setup_logging(args.debug)
    try:
        return args.func(args)
    except DeskAsmError as exc:
        console.print(f"[bold red]Error:[/] {exc}")
        cause = exc.cause if isinstance(exc, StageError) else exc
        if isinstance(cause, NoPathError) and cause.diagnostics:
            console.print(Panel(json.dumps(cause.diagnostics, indent=2, sort_keys=True),
                                title="no-path diagnostics", border_style="yellow"))
        return exc.exit_code
    except OSError as exc:
        console.print(f"[bold red]Error:[/] {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
