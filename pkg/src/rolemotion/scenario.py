"""Scenario harness: environment, task sequences, execution, classification.

A scenario file binds a robot, a demonstration recording, a set of objects
(static boxes, one-axis doors, graspable targets), and an ordered task
list.  Running a scenario solves every task waypoint with one of four
methods, simulates the articulation side effects (doors only move while
held, and fall closed when released until the robot's body blocks them),
then classifies the whole run:

- continuity: during door tasks, does the interpolated grasp point stay
  inside a tube around the handle arc;
- collisions: does any interpolated configuration touch the environment;
- achievement: did the final pick / look tasks actually come true.

Reports are plain dicts with sorted keys and no timestamps: the same
scenario, method, and seed produce byte-identical JSON on every run.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import demo as demo_mod
from . import kernels
from .errors import AlignmentError, ScenarioFormatError
from .geometry import Box, Transform, boxes_as_rows, rot_about, unit
from .kinematics import KinematicChain, interpolate_configs, load_robot
from .mapping import MappingTable, RoleDivision, load_table
from .posture import Posture, PostureGoal, load_catalog
from .solver import (ClearanceSpec, GAParams, HoldSpec, OrientationGoal,
                     PositionGoal, Solver, TaskGoals)

_SCEN_DIR = Path(__file__).resolve().parent / "data" / "scenarios"

METHODS = ("proposed", "baseline", "baseline_seeded", "retarget")


# -- objects ------------------------------------------------------------------


@dataclass(eq=False)
class StaticObject:
    name: str
    boxes: tuple


@dataclass(eq=False)
class TargetObject:
    """A graspable or observable point with an axis (e.g. a can)."""

    name: str
    point: np.ndarray
    axis: np.ndarray
    demo_point: np.ndarray  # where it stood during the demonstration


@dataclass(eq=False)
class Door:
    """One-axis revolute panel with a handle.

    Positive opening angle rotates the panel about (hinge_point,
    hinge_axis).  The handle is a grasp point on the panel; boxes in
    `body` never move.
    """

    name: str
    body: tuple
    panel: Box
    hinge_point: np.ndarray
    hinge_axis: np.ndarray
    handle_closed: np.ndarray
    handle_axis: np.ndarray
    max_open: float
    step: float
    auto_close: bool

    def transform(self, angle: float) -> Transform:
        rot = rot_about(self.hinge_axis, angle)
        return Transform(rot, self.hinge_point - rot @ self.hinge_point)

    def panel_at(self, angle: float) -> Box:
        return self.panel.transformed(self.transform(angle))

    def handle_at(self, angle: float) -> np.ndarray:
        return self.transform(angle).apply(self.handle_closed)

    def palm_goal_at(self, angle: float, closed_palm) -> np.ndarray:
        return self.transform(angle).apply_vector(closed_palm)

    def waypoint_angles(self, start: float):
        """Opening angles from start to max_open, spaced by step."""
        out = []
        k = 1
        while True:
            a = start + k * self.step
            if a >= self.max_open - 1e-12:
                out.append(self.max_open)
                return out
            out.append(a)
            k += 1

    def arc_distance(self, point, lo: float = 0.0, hi: float = None) -> float:
        """Distance from a point to the handle arc (angles lo..hi)."""
        hi = self.max_open if hi is None else hi
        axis = unit(self.hinge_axis)
        rel = self.handle_closed - self.hinge_point
        h_axial = float(rel @ axis)
        r_vec = rel - h_axial * axis
        radius = float(np.linalg.norm(r_vec))
        e1 = r_vec / radius
        e2 = np.cross(axis, e1)
        p = np.asarray(point, dtype=np.float64) - self.hinge_point
        px = float(p @ e1)
        py = float(p @ e2)
        pz = float(p @ axis)
        ang = math.atan2(py, px)
        ang = min(max(ang, lo), hi)
        closest = (self.hinge_point + radius * (math.cos(ang) * e1
                                                + math.sin(ang) * e2)
                   + h_axial * axis)
        return float(np.linalg.norm(np.asarray(point) - closest))


# -- scenario loading ---------------------------------------------------------


@dataclass(eq=False)
class TaskSpec:
    name: str
    kind: str  # reach | open | pick | look
    arm: str
    target: str
    offset: np.ndarray
    orientation: dict
    position_tol: float
    per_axis: bool
    hold: str = None


@dataclass
class SweepSpec:
    executions: int
    object: str
    positions: tuple


@dataclass(eq=False)
class Scenario:
    name: str
    robot: str
    demo: str
    objects: dict
    tasks: tuple
    start_base: np.ndarray
    options: dict
    thresholds: dict
    ga: dict
    sweep: SweepSpec = None
    path: str = ""


_DEFAULT_OPTIONS = {
    "visit_radius": 0.05,
    "debounce_s": 0.2,
    "hold_radius": 0.05,
    "continuity_tube": 0.02,
    "continuity_samples": 50,
    "collision_samples": 8,
    "approach_window": 0.25,
    "baseline_deviation_weight": 0.01,
    "auto_close_step": 0.02,
    "clearance_margin": 0.015,
    "clearance_weight": 5.0,
    "clearance_samples": 4,
}
_DEFAULT_THRESHOLDS = {"config_factor": 0.04, "connection_factor": 0.04}


def _need(obj, key, where):
    if key not in obj:
        raise ScenarioFormatError(f"{where}: missing field {key!r}")
    return obj[key]


def _box_from(spec, where) -> Box:
    if set(spec) != {"min", "max"}:
        raise ScenarioFormatError(f"{where}: boxes need exactly min and max")
    return Box.from_bounds(spec["min"], spec["max"])


def _parse_object(name, spec):
    kind = _need(spec, "kind", f"object {name}")
    known = {
        "static": {"kind", "boxes"},
        "door": {"kind", "body", "panel", "hinge", "handle", "max_open",
                 "step", "auto_close"},
        "target": {"kind", "point", "axis", "demo_point"},
    }
    if kind not in known:
        raise ScenarioFormatError(f"object {name}: unknown kind {kind!r}")
    extra = set(spec) - known[kind]
    if extra:
        raise ScenarioFormatError(f"object {name}: unknown fields {sorted(extra)}")
    if kind == "static":
        return StaticObject(name, tuple(_box_from(b, f"object {name}")
                                        for b in spec["boxes"]))
    if kind == "target":
        point = np.array(_need(spec, "point", f"object {name}"), dtype=np.float64)
        return TargetObject(
            name=name, point=point,
            axis=unit(np.array(_need(spec, "axis", f"object {name}")),),
            demo_point=np.array(spec.get("demo_point", point), dtype=np.float64))
    hinge = _need(spec, "hinge", f"object {name}")
    handle = _need(spec, "handle", f"object {name}")
    return Door(
        name=name,
        body=tuple(_box_from(b, f"object {name}") for b in spec["body"]),
        panel=_box_from(_need(spec, "panel", f"object {name}"), f"object {name}"),
        hinge_point=np.array(hinge["point"], dtype=np.float64),
        hinge_axis=unit(np.array(hinge["axis"], dtype=np.float64)),
        handle_closed=np.array(handle["point"], dtype=np.float64),
        handle_axis=unit(np.array(handle["axis"], dtype=np.float64)),
        max_open=float(_need(spec, "max_open", f"object {name}")),
        step=float(spec.get("step", 0.1)),
        auto_close=bool(spec.get("auto_close", True)),
    )


_TASK_KEYS = {"name", "kind", "arm", "target", "offset", "orientation",
              "position_tol", "per_axis", "hold"}


def load_scenario(source) -> Scenario:
    p = Path(source)
    if not p.exists() and not p.suffix:
        p = _SCEN_DIR / f"{source}.json"
    if not p.exists():
        raise ScenarioFormatError(
            f"no scenario at {source!r} (packaged: {', '.join(scenario_names())})")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ScenarioFormatError(f"{p}: invalid JSON ({e})") from e
    known = {"name", "robot", "demo", "objects", "tasks", "start", "options",
             "thresholds", "ga", "sweep", "notes"}
    extra = set(raw) - known
    if extra:
        raise ScenarioFormatError(f"{p}: unknown fields {sorted(extra)}")
    objects = {name: _parse_object(name, spec)
               for name, spec in _need(raw, "objects", str(p)).items()}
    tasks = []
    for i, t in enumerate(_need(raw, "tasks", str(p))):
        extra = set(t) - _TASK_KEYS
        if extra:
            raise ScenarioFormatError(f"task {i}: unknown fields {sorted(extra)}")
        kind = _need(t, "kind", f"task {i}")
        if kind not in ("reach", "open", "pick", "look"):
            raise ScenarioFormatError(f"task {i}: unknown kind {kind!r}")
        target = _need(t, "target", f"task {i}")
        if target not in objects:
            raise ScenarioFormatError(f"task {i}: unknown target {target!r}")
        hold = t.get("hold")
        if hold is not None and hold not in objects:
            raise ScenarioFormatError(f"task {i}: unknown hold object {hold!r}")
        tasks.append(TaskSpec(
            name=t.get("name", f"T{i + 1}"),
            kind=kind,
            arm=_need(t, "arm", f"task {i}"),
            target=target,
            offset=np.array(t.get("offset", [0.0, 0.0, 0.0]), dtype=np.float64),
            orientation=t.get("orientation"),
            position_tol=float(t.get("position_tol", 0.02)),
            per_axis=bool(t.get("per_axis", False)),
            hold=hold,
        ))
    names = [t.name for t in tasks]
    if len(set(names)) != len(names):
        raise ScenarioFormatError(f"{p}: duplicate task names")
    options = dict(_DEFAULT_OPTIONS)
    options.update(raw.get("options", {}))
    extra = set(options) - set(_DEFAULT_OPTIONS)
    if extra:
        raise ScenarioFormatError(f"{p}: unknown options {sorted(extra)}")
    thresholds = dict(_DEFAULT_THRESHOLDS)
    thresholds.update(raw.get("thresholds", {}))
    sweep = None
    if "sweep" in raw:
        s = raw["sweep"]
        extra = set(s) - {"executions", "object", "positions"}
        if extra:
            raise ScenarioFormatError(f"{p}: unknown sweep fields {sorted(extra)}")
        if s["object"] not in objects:
            raise ScenarioFormatError(f"{p}: sweep object {s['object']!r} unknown")
        sweep = SweepSpec(
            executions=int(s["executions"]),
            object=s["object"],
            positions=tuple(tuple(float(v) for v in pos)
                            for pos in s["positions"]),
        )
    start = raw.get("start", {})
    return Scenario(
        name=_need(raw, "name", str(p)),
        robot=_need(raw, "robot", str(p)),
        demo=_need(raw, "demo", str(p)),
        objects=objects,
        tasks=tuple(tasks),
        start_base=np.array(start.get("base", [0.0, 0.0, 0.0]), dtype=np.float64),
        options=options,
        thresholds=thresholds,
        ga=raw.get("ga", {}),
        sweep=sweep,
        path=str(p),
    )


def scenario_names():
    return sorted(p.stem for p in _SCEN_DIR.glob("*.json"))


# -- execution ----------------------------------------------------------------


@dataclass(eq=False)
class _ExecState:
    q: np.ndarray
    door_angles: dict
    holders: dict  # door name -> (arm name, handle point at current angle)
    t_cursor: float
    trajectory: list  # (q, {door: angle}) checkpoints, in order

    def copy(self) -> "_ExecState":
        return _ExecState(self.q.copy(), dict(self.door_angles),
                          dict(self.holders), self.t_cursor,
                          list(self.trajectory))


class Runner:
    """Executes one scenario with one method.

    Heavyweight setup (robot, tables, demo timeline) happens once in the
    constructor; run() and sweep() are then pure functions of the seed.
    """

    def __init__(self, scenario: Scenario, method: str, workers: int = 1):
        if method not in METHODS:
            raise ScenarioFormatError(
                f"unknown method {method!r}; pick one of {', '.join(METHODS)}")
        self.scn = scenario
        self.method = method
        self.chain = load_robot(scenario.robot)
        self.catalog = load_catalog()
        self.frames = demo_mod.load_demo(scenario.demo)
        self.options = scenario.options
        ga_kwargs = dict(scenario.ga)
        ga_kwargs["workers"] = workers
        self.ga = GAParams(**ga_kwargs)
        th = scenario.thresholds
        self._solvers = {}
        self._timelines = {}
        for arm_name in {t.arm for t in scenario.tasks}:
            if arm_name not in self.chain.arms:
                raise ScenarioFormatError(
                    f"robot {self.chain.name} has no arm {arm_name!r}")
            roles = RoleDivision.for_arm(self.chain, arm_name,
                                         th["config_factor"],
                                         th["connection_factor"])
            table = load_table(self.chain.name, arm_name)
            self._solvers[arm_name] = Solver(self.chain, roles, table, self.ga)
            side = self.chain.arms[arm_name].side
            if side not in self._timelines:
                self._timelines[side] = demo_mod.extract_timeline(
                    self.frames, self.catalog, side,
                    self.options["debounce_s"])

    # ---- environment helpers

    def _env_boxes(self, door_angles: dict, skip_door_panels=()):
        rows = []
        for name, obj in self.scn.objects.items():
            if isinstance(obj, StaticObject):
                rows.extend(obj.boxes)
            elif isinstance(obj, Door):
                rows.extend(obj.body)
                if name not in skip_door_panels:
                    rows.append(obj.panel_at(door_angles[name]))
        return rows

    def _collides(self, q, door_angles: dict) -> bool:
        boxes = boxes_as_rows(self._env_boxes(door_angles))
        segs, radii, _ = self.chain.collision_segments(
            self.chain.forward_kinematics(q))
        if not len(segs) or not len(boxes):
            return False
        d = kernels.seg_box_distance_batch(segs, boxes, self.ga.workers)
        return bool(np.any(d - radii[:, None] < 0.0))

    def _auto_close(self, door: Door, state: _ExecState):
        """Drop a released door toward closed until the robot blocks it."""
        if not door.auto_close:
            return
        current = state.door_angles[door.name]
        step = self.options["auto_close_step"]
        angle = current
        while angle > 0.0:
            candidate = max(angle - step, 0.0)
            panel = boxes_as_rows([door.panel_at(candidate)])
            segs, radii, _ = self.chain.collision_segments(
                self.chain.forward_kinematics(state.q))
            d = kernels.seg_box_distance_batch(segs, panel, self.ga.workers)
            if np.any(d - radii[:, None] < 0.0):
                break
            angle = candidate
        state.door_angles[door.name] = angle
        state.holders.pop(door.name, None)

    # ---- goal construction

    def _orientation_goal(self, task: TaskSpec, point, door_angle=None,
                          t_visit=None):
        spec = task.orientation
        if spec is None:
            return None
        extra = set(spec) - {"source", "palm", "normal", "cone_deg",
                             "normal_cone_deg"}
        if extra:
            raise ScenarioFormatError(
                f"task {task.name}: unknown orientation fields {sorted(extra)}")
        cone = math.radians(float(spec.get("cone_deg", 45.0)))
        cone_n = math.radians(float(spec.get("normal_cone_deg",
                                             spec.get("cone_deg", 45.0))))
        tol_p = 1.0 - math.cos(cone)
        tol_n = 1.0 - math.cos(cone_n)
        source = spec.get("source", "fixed")
        obj = self.scn.objects[task.target]
        if source == "fixed":
            palm = unit(np.array(spec["palm"], dtype=np.float64))
            normal = unit(np.array(spec["normal"], dtype=np.float64))
        elif source == "door":
            door = obj
            palm = door.palm_goal_at(door_angle,
                                     unit(np.array(spec["palm"])))
            normal = door.handle_axis
        elif source == "demonstration":
            side = self.chain.arms[task.arm].side
            palm = demo_mod.approach_direction(
                self.frames, t_visit, side, self.options["approach_window"])
            if palm is None:
                palm = unit(np.array(spec["palm"], dtype=np.float64))
            normal = obj.axis if isinstance(obj, TargetObject) else \
                unit(np.array(spec["normal"]))
        else:
            raise ScenarioFormatError(
                f"task {task.name}: unknown orientation source {source!r}")
        return OrientationGoal(palm=palm, normal=normal,
                               palm_tol=tol_p, normal_tol=tol_n)

    def _hold_goal(self, task: TaskSpec, state: _ExecState):
        if task.hold is None:
            return None
        holder = state.holders.get(task.hold)
        if holder is None:
            return None
        arm_name, point = holder
        return HoldSpec(arm=arm_name, point=np.asarray(point),
                        tol=0.9 * float(self.options["hold_radius"]))

    def _clearance_spec(self, door_angles: dict):
        weight = float(self.options["clearance_weight"])
        if weight <= 0.0:
            return None
        rows = boxes_as_rows(self._env_boxes(door_angles))
        if not len(rows):
            return None
        return ClearanceSpec(boxes=rows,
                             margin=float(self.options["clearance_margin"]),
                             weight=weight,
                             samples=int(self.options["clearance_samples"]))

    def _solve(self, arm: str, state: _ExecState, goal: PostureGoal,
               goals: TaskGoals, seed):
        solver = self._solvers[arm]
        if self.method == "proposed":
            return solver.solve(state.q, goal, goals, seed)
        if self.method == "retarget":
            return solver.solve_retarget(state.q, goal, goals)
        w = self.options["baseline_deviation_weight"]
        if self.method == "baseline":
            return solver.solve_baseline(state.q, goals, seed,
                                         deviation_weight=w, tag="baseline")
        seeded = solver.map_start(state.q, goal)
        return solver.solve_baseline(state.q, goals, seed, seed_config=seeded,
                                     deviation_weight=w, tag="baseline_seeded")

    # ---- task execution

    def _visit(self, point, side, t_min):
        t = demo_mod.visit_time(self.frames, point,
                                self.options["visit_radius"], t_min, side)
        if t is not None:
            return t, False
        t, _ = demo_mod.nearest_approach(self.frames, point, t_min, side)
        return t, True

    def _run_task(self, task: TaskSpec, state: _ExecState, seed_root, records):
        arm = self.chain.arms[task.arm]
        side = arm.side
        timeline = self._timelines[side]
        obj = self.scn.objects[task.target]
        rec = {"task": task.name, "kind": task.kind, "arm": task.arm,
               "waypoints": []}
        records.append(rec)

        if task.kind == "look":
            # Nothing to solve; evaluated at classification time.
            return

        if task.kind == "open":
            self._run_open(task, obj, state, seed_root, rec)
            return

        # reach / pick: one waypoint.
        if isinstance(obj, Door):
            angle = state.door_angles[task.target]
            point = obj.handle_at(angle) + task.offset
            demo_point = point
            door_angle = angle
        else:
            point = np.asarray(obj.point) + task.offset
            demo_point = (np.asarray(obj.demo_point) + task.offset
                          if isinstance(obj, TargetObject) else point)
            door_angle = None
        t_visit, approx = self._visit(demo_point, side, state.t_cursor)
        state.t_cursor = t_visit
        posture = demo_mod.posture_at(timeline, t_visit)
        goal = PostureGoal.fixed(posture)
        goals = TaskGoals(
            position=PositionGoal(point=point, tol=task.position_tol,
                                 per_axis=task.per_axis),
            orientation=self._orientation_goal(task, point, door_angle,
                                               t_visit),
            hold=self._hold_goal(task, state),
            clearance=self._clearance_spec(state.door_angles),
            stance=demo_mod.shoulder_at(self.frames, t_visit, side),
        )
        result = self._solve(task.arm, state, goal, goals,
                             seed_root + (len(records), 0))
        state.q = result.q
        state.trajectory.append((result.q.copy(), dict(state.door_angles)))
        rec["waypoints"].append(self._waypoint_record(
            point, t_visit, posture, result, approx))
        # Losing grip on a held door lets it fall.
        if task.hold is not None and task.hold in state.holders:
            holder_arm, hpoint = state.holders[task.hold]
            ee = self.chain.ee_transform(
                self.chain.forward_kinematics(state.q), holder_arm)
            if float(np.linalg.norm(ee.pos - hpoint)) > self.options["hold_radius"]:
                self._auto_close(self.scn.objects[task.hold], state)

    def _run_open(self, task: TaskSpec, door: Door, state: _ExecState,
                  seed_root, rec):
        arm = self.chain.arms[task.arm]
        side = arm.side
        timeline = self._timelines[side]
        start_angle = state.door_angles[door.name]
        angles = door.waypoint_angles(start_angle)
        grip = True
        for wp_i, angle in enumerate(angles):
            point = door.handle_at(angle)
            t_visit, approx = self._visit(point, side, state.t_cursor)
            state.t_cursor = t_visit
            goal = demo_mod.posture_goal_at(timeline, t_visit)
            goals = TaskGoals(
                position=PositionGoal(point=point, tol=task.position_tol,
                                     per_axis=task.per_axis),
                orientation=self._orientation_goal(task, point, angle, t_visit),
                clearance=self._clearance_spec(
                    {**state.door_angles, door.name: angle}),
                stance=demo_mod.shoulder_at(self.frames, t_visit, side),
            )
            result = self._solve(task.arm, state, goal, goals,
                                 seed_root + (1000 + wp_i,))
            state.q = result.q
            ee = self.chain.ee_transform(
                self.chain.forward_kinematics(state.q), task.arm)
            on_handle = float(np.linalg.norm(ee.pos - point)) <= \
                self.options["hold_radius"]
            if grip and on_handle:
                state.door_angles[door.name] = angle
                state.holders[door.name] = (task.arm, point)
            elif grip:
                grip = False
                self._auto_close(door, state)
            state.trajectory.append((state.q.copy(), dict(state.door_angles)))
            wrec = self._waypoint_record(point, t_visit,
                                         goal.start, result, approx)
            wrec["angle"] = round(angle, 10)
            wrec["grip"] = bool(on_handle and grip)
            rec["waypoints"].append(wrec)
        rec["final_angle"] = round(state.door_angles[door.name], 10)

    def _waypoint_record(self, point, t_visit, posture: Posture, result,
                         approx):
        return {
            "target": [float(v) for v in point],
            "demo_time": round(float(t_visit), 6),
            "approximate_visit": bool(approx),
            "posture": list(posture.key),
            "method": result.method,
            "q": [float(v) for v in result.q],
            "satisfied": {k: bool(v) for k, v in result.satisfied.items()},
            "residuals": {k: float(v) for k, v in result.residuals.items()},
            "warnings": list(result.warnings),
        }

    # ---- classification

    def _interp_states(self, state: _ExecState, n: int):
        """Uniform samples along the executed checkpoint chain."""
        traj = state.trajectory
        out = []
        for i in range(len(traj) - 1):
            qa, da = traj[i]
            qb, db = traj[i + 1]
            for s in range(n):
                t = s / n
                q = interpolate_configs(qa, qb, t)
                angles = {k: (1 - t) * da[k] + t * db[k] for k in da}
                out.append((q, angles))
        if traj:
            out.append(traj[-1])
        return out

    def _classify(self, state: _ExecState, records):
        opts = self.options
        # Collisions along the full interpolated trajectory.
        collided = False
        for q, angles in self._interp_states(state, opts["collision_samples"]):
            if self._collides(q, angles):
                collided = True
                break
        # Continuity of each door task: grasp point stays in the arc tube.
        continuity = None
        for rec in records:
            if rec["kind"] != "open":
                continue
            door = self.scn.objects[self._task_by_name(rec["task"]).target]
            arm = self._task_by_name(rec["task"]).arm
            ok = self._door_continuity(door, arm, rec, opts)
            continuity = ok if continuity is None else (continuity and ok)
        # Achievement: every pick and look task came true at the end state.
        achieved = True
        any_goal = False
        for rec in records:
            task = self._task_by_name(rec["task"])
            if task.kind == "pick":
                any_goal = True
                achieved = achieved and self._pick_achieved(task, rec, state)
            elif task.kind == "look":
                any_goal = True
                achieved = achieved and self._look_achieved(task, state)
        if not any_goal:
            achieved = None
        return {
            "continuity": continuity,
            "collisions": collided,
            "achievement": achieved,
        }

    def _task_by_name(self, name):
        for t in self.scn.tasks:
            if t.name == name:
                return t
        raise KeyError(name)

    def _door_continuity(self, door: Door, arm: str, rec, opts) -> bool:
        qs = [np.array(w["q"]) for w in rec["waypoints"]]
        if len(qs) < 2:
            return True
        tube = opts["continuity_tube"]
        n = opts["continuity_samples"]
        for i in range(len(qs) - 1):
            for s in range(n + 1):
                q = interpolate_configs(qs[i], qs[i + 1], s / n)
                ee = self.chain.ee_transform(
                    self.chain.forward_kinematics(q), arm)
                if door.arc_distance(ee.pos) > tube:
                    return False
        return True

    def _pick_achieved(self, task: TaskSpec, rec, state: _ExecState) -> bool:
        w = rec["waypoints"][-1]
        ok = w["satisfied"].get("position", False) and \
            w["satisfied"].get("orientation", True)
        if not ok:
            return False
        return not self._collides(np.array(w["q"]), state.door_angles)

    def _look_achieved(self, task: TaskSpec, state: _ExecState) -> bool:
        if self.chain.camera is None:
            return False
        cam_link, cam_off = self.chain.camera
        fk = self.chain.forward_kinematics(state.q)
        origin = fk.world_point(cam_link, cam_off)
        obj = self.scn.objects[task.target]
        target = np.asarray(obj.point) + task.offset
        seg = np.concatenate([origin, target])[None, :]
        boxes = boxes_as_rows(self._env_boxes(state.door_angles))
        if not len(boxes):
            return True
        d = kernels.seg_box_distance_batch(seg, boxes, self.ga.workers)
        return bool(np.all(d > 0.0))

    # ---- public entry points

    def _initial_state(self) -> _ExecState:
        q = self.chain.default_configuration()
        for jid, val in zip(("base_x", "base_y", "base_yaw"),
                            self.scn.start_base):
            q[self.chain.index(jid)] = float(val)
        doors = {name: 0.0 for name, obj in self.scn.objects.items()
                 if isinstance(obj, Door)}
        return _ExecState(q=q, door_angles=doors, holders={}, t_cursor=0.0,
                          trajectory=[(q.copy(), dict(doors))])

    def run(self, seed: int) -> dict:
        state = self._initial_state()
        records = []
        for ti, task in enumerate(self.scn.tasks):
            self._run_task(task, state, (seed, ti), records)
        classification = self._classify(state, records)
        return {
            "format": "rolemotion-report-v1",
            "scenario": self.scn.name,
            "robot": self.chain.name,
            "demo": self.scn.demo,
            "method": self.method,
            "seed": seed,
            "kernel_backend": kernels.BACKEND,
            "options": {k: self.options[k] for k in sorted(self.options)},
            "tasks": records,
            "door_angles": {k: round(v, 10)
                            for k, v in sorted(state.door_angles.items())},
            "classification": classification,
        }

    def sweep(self, seed: int) -> dict:
        """Target-variation protocol.

        Tasks before the first one aiming at the swept object run once per
        execution; the remaining tasks re-run for every target position
        from that saved state.  A trial succeeds when every goal task in
        the suffix is achieved without new collisions.
        """
        spec = self.scn.sweep
        if spec is None:
            raise ScenarioFormatError(f"{self.scn.name} declares no sweep")
        swept = self.scn.objects[spec.object]
        split = None
        for i, t in enumerate(self.scn.tasks):
            if t.target == spec.object:
                split = i
                break
        if split is None:
            raise ScenarioFormatError("no task aims at the swept object")
        executions = []
        original = swept.point.copy()
        for e in range(spec.executions):
            state = self._initial_state()
            records = []
            for ti, task in enumerate(self.scn.tasks[:split]):
                self._run_task(task, state, (seed, e, ti), records)
            prefix_end = len(state.trajectory)
            trials = []
            for pi, pos in enumerate(spec.positions):
                swept.point = np.array(pos, dtype=np.float64)
                tstate = state.copy()
                trecords = []
                failed = None
                try:
                    for ti, task in enumerate(self.scn.tasks[split:]):
                        self._run_task(task, tstate, (seed, e, split + ti, pi),
                                       trecords)
                except AlignmentError as err:
                    failed = str(err)
                success = False
                achieved = {}
                collided = None
                if failed is None:
                    sub = tstate.copy()
                    sub.trajectory = tstate.trajectory[prefix_end - 1:]
                    cls = self._classify(sub, trecords)
                    collided = cls["collisions"]
                    success = bool(cls["achievement"]) and not cls["collisions"]
                    achieved = cls
                displacement = float(np.linalg.norm(
                    np.array(pos) - np.asarray(swept.demo_point)))
                trials.append({
                    "position": [float(v) for v in pos],
                    "displacement": round(displacement, 6),
                    "success": success,
                    "collisions": collided,
                    "error": failed,
                })
            swept.point = original.copy()
            executions.append({
                "execution": e,
                "door_angles": {k: round(v, 10) for k, v in
                                sorted(state.door_angles.items())},
                "trials": trials,
            })
        successes = sum(t["success"] for ex in executions for t in ex["trials"])
        total = sum(len(ex["trials"]) for ex in executions)
        return {
            "format": "rolemotion-sweep-v1",
            "scenario": self.scn.name,
            "robot": self.chain.name,
            "demo": self.scn.demo,
            "method": self.method,
            "seed": seed,
            "kernel_backend": kernels.BACKEND,
            "successes": successes,
            "trials": total,
            "executions": executions,
        }


def report_json(report: dict) -> str:
    """Canonical byte-stable serialization for reports."""
    return json.dumps(report, sort_keys=True, indent=2) + "\n"
