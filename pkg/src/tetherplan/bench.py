"""Benchmark sweep: plan a grid of start/goal variations in both modes.

Each grid cell is one pick-and-place task: the row pitches the start
pose, the column rolls the goal pose, and both planner modes run on it.
Finished plans are re-checked from their raw waypoint arrays and sorted
into four outcomes:

    o  success          plan found, bend limit respected, no contacts
    x  bend_violation   some waypoint bends the cable past the limit
    *  cable_collision  an arm touches the hanging cable before grasping
    F  no_plan          the planner found no motion

A bend violation outranks a cable collision when both occur.  The
constrained planner never emits x or * cells by construction; the
re-check is what proves that.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .cable import bend_angle_batch, cable_capsule
from .collision import motion_clearances
from .geometry import Pose
from .planner import MotionPlan, PlanCache, PlanResult, PlanningProblem, plan
from .scene import Scene
from .torque import trace_plan

THREADS_ENV = "TETHERPLAN_THREADS"

LABEL_SYMBOLS = {
    "success": "o",
    "bend_violation": "x",
    "cable_collision": "*",
    "no_plan": "F",
}


@dataclass(frozen=True)
class Recheck:
    """Independent post-hoc audit of a finished plan's waypoint arrays."""

    theta_max: float
    bend_waypoint: int | None
    cable_waypoint: int | None
    collision_waypoint: int | None
    min_clearance: float

    @property
    def clean(self) -> bool:
        return (self.bend_waypoint is None and self.cable_waypoint is None
                and self.collision_waypoint is None)


@dataclass(frozen=True)
class Outcome:
    """One classified cell result."""

    label: str
    theta_max_deg: float | None = None
    first_violation: int | None = None
    failure: str | None = None

    @property
    def symbol(self) -> str:
        return LABEL_SYMBOLS[self.label]


def recheck_plan(motion: MotionPlan, problem: PlanningProblem) -> Recheck:
    """Re-derive bend, cable-contact, and collision facts from waypoints.

    Trusts nothing the planner recorded beyond the joint trajectories,
    tool track, and holding labels.
    """
    theta = bend_angle_batch(motion.tool_rot, motion.tool_t,
                             problem.balancer, problem.tool)
    over = np.nonzero(theta >= problem.constraint.theta_max)[0]
    bend_wp = int(over[0]) if over.size else None

    segs, radii, names = problem.tool.shape_segments()
    world_segs = np.einsum("wij,kpj->wkpi",
                           np.ascontiguousarray(motion.tool_rot), segs) \
        + motion.tool_t[:, None, None, :]
    radii = list(radii)
    names = list(names)

    w = motion.n_waypoints
    first_hold = next((i for i, h in enumerate(motion.holding) if h), w)
    window_end = min(first_hold + 1, w)

    cable = cable_capsule(problem.balancer,
                          Pose(motion.tool_rot[0], motion.tool_t[0]),
                          problem.tool)
    # Cable-to-tool proximity is structural (the cable suspends the
    # tool); only arm and environment contact with the cable counts.
    cable_world = problem.world.with_static("cable", cable,
                                            exclude_against=names)

    cable_wp = None
    collision_wp = None
    min_clear = math.inf
    spans = ((cable_world, 0, window_end), (problem.world, window_end, w))
    for world, lo, hi in spans:
        if lo >= hi:
            continue
        clear, pair_idx, pair_names = motion_clearances(
            world, problem.robot, motion.q_left[lo:hi], motion.q_right[lo:hi],
            world_segs[lo:hi], radii, names)
        min_clear = min(min_clear, float(clear.min()))
        for i in np.nonzero(clear < 0.0)[0]:
            pair = pair_names[pair_idx[i]]
            if "cable" in pair:
                if cable_wp is None:
                    cable_wp = lo + int(i)
            elif collision_wp is None:
                collision_wp = lo + int(i)

    return Recheck(
        theta_max=float(theta.max()),
        bend_waypoint=bend_wp,
        cable_waypoint=cable_wp,
        collision_waypoint=collision_wp,
        min_clearance=min_clear,
    )


def classify(result: PlanResult, recheck: Recheck | None) -> Outcome:
    """Four-outcome classification; bend outranks cable contact."""
    if result.plan is None:
        return Outcome(label="no_plan", failure=result.failure)
    if recheck is None:
        raise ValueError("a finished plan requires a recheck to classify")
    theta_deg = math.degrees(recheck.theta_max)
    if recheck.bend_waypoint is not None:
        return Outcome(label="bend_violation", theta_max_deg=theta_deg,
                       first_violation=recheck.bend_waypoint)
    if recheck.cable_waypoint is not None:
        return Outcome(label="cable_collision", theta_max_deg=theta_deg,
                       first_violation=recheck.cable_waypoint)
    if recheck.collision_waypoint is not None:
        # Both modes validate every motion against the environment, so a
        # residual contact means the planner itself is unsound; surface
        # that instead of mislabeling the cell.
        raise RuntimeError(
            "re-check found an environment collision at waypoint "
            f"{recheck.collision_waypoint}; the planner should never emit one")
    return Outcome(label="success", theta_max_deg=theta_deg)


@dataclass(frozen=True)
class SweepCell:
    row: int
    col: int
    pitch: float
    roll: float
    mode: str
    outcome: Outcome
    recheck: Recheck | None
    n_edges: int | None
    n_waypoints: int | None
    joint_distance: float | None
    peak_torque: dict
    runtime: float


@dataclass(frozen=True)
class TorqueSummary:
    """Constrained-vs-unconstrained peak-torque reductions.

    Aggregated over cells where both modes produced a plan (the
    unconstrained plan may carry a bend or cable violation; a missing
    plan contributes nothing).  Reduction is the percentage drop of the
    constrained peak relative to the unconstrained peak, per arm that
    appears in both plans.
    """

    n_cells: int
    mean_reduction_pct: float | None
    per_arm_mean_pct: dict


@dataclass(frozen=True)
class SweepReport:
    scene_name: str
    pitch_rows: tuple[float, ...]
    roll_cols: tuple[float, ...]
    cells: tuple[SweepCell, ...]

    def cell(self, row: int, col: int, mode: str) -> SweepCell:
        for c in self.cells:
            if (c.row, c.col, c.mode) == (row, col, mode):
                return c
        raise KeyError((row, col, mode))

    def grid(self, mode: str) -> list[list[str]]:
        rows = [[" "] * len(self.roll_cols) for _ in self.pitch_rows]
        for c in self.cells:
            if c.mode == mode:
                rows[c.row][c.col] = c.outcome.symbol
        return rows

    def success_rate(self, mode: str) -> float | None:
        cells = [c for c in self.cells if c.mode == mode]
        if not cells:
            return None
        good = sum(1 for c in cells if c.outcome.label == "success")
        return good / len(cells)

    def outcome_counts(self, mode: str) -> dict:
        counts = {label: 0 for label in LABEL_SYMBOLS}
        for c in self.cells:
            if c.mode == mode:
                counts[c.outcome.label] += 1
        return counts

    def torque_summary(self) -> TorqueSummary:
        reductions = []
        per_arm: dict[str, list[float]] = {"left": [], "right": []}
        n_cells = 0
        for i in range(len(self.pitch_rows)):
            for j in range(len(self.roll_cols)):
                try:
                    con = self.cell(i, j, "constrained")
                    unc = self.cell(i, j, "unconstrained")
                except KeyError:
                    continue
                if (con.outcome.label == "no_plan"
                        or unc.outcome.label == "no_plan"):
                    continue
                shared = sorted(set(con.peak_torque) & set(unc.peak_torque))
                if not shared:
                    continue
                n_cells += 1
                for arm in shared:
                    pu = unc.peak_torque[arm]
                    if pu <= 0.0:
                        continue
                    red = 100.0 * (pu - con.peak_torque[arm]) / pu
                    reductions.append(red)
                    per_arm[arm].append(red)
        mean = float(np.mean(reductions)) if reductions else None
        per_arm_mean = {arm: float(np.mean(v))
                        for arm, v in per_arm.items() if v}
        return TorqueSummary(n_cells=n_cells, mean_reduction_pct=mean,
                             per_arm_mean_pct=per_arm_mean)


def _thread_count(threads: int | None) -> int:
    if threads is not None:
        return max(1, threads)
    env = os.environ.get(THREADS_ENV, "")
    if env.strip():
        return max(1, int(env))
    return 1


def run_cell(scene: Scene, row: int, col: int, mode: str,
             cache: PlanCache | None = None) -> SweepCell:
    """Plan, re-check, and classify one grid cell."""
    pitch = scene.pitch_rows[row]
    roll = scene.roll_cols[col]
    problem = scene.problem(pitch=pitch, roll=roll)
    options = replace(scene.options, time_budget=math.inf)
    t0 = time.monotonic()
    result = plan(problem, constrained=(mode == "constrained"),
                  options=options, cache=cache)
    runtime = time.monotonic() - t0
    recheck = None
    peaks = {}
    if result.plan is not None:
        recheck = recheck_plan(result.plan, problem)
        trace = trace_plan(result.plan, problem.robot, problem.balancer,
                           problem.tool)
        peaks = {arm: trace.peak(arm) for arm in trace.arms()}
    outcome = classify(result, recheck)
    motion = result.plan
    return SweepCell(
        row=row, col=col, pitch=pitch, roll=roll, mode=mode, outcome=outcome,
        recheck=recheck,
        n_edges=motion.n_edges if motion else None,
        n_waypoints=motion.n_waypoints if motion else None,
        joint_distance=motion.joint_distance if motion else None,
        peak_torque=peaks, runtime=runtime)


def sweep(scene: Scene, threads: int | None = None) -> SweepReport:
    """Run the full grid in both modes.

    Cells run independently (optionally in parallel) against one shared
    plan cache; results are assembled in (row, col, mode) order.  Cell
    results do not depend on the thread count or execution order: the
    cache is content-addressed and the planner budget counts validation
    attempts, cache hits included.
    """
    tasks = [(i, j, mode)
             for i in range(len(scene.pitch_rows))
             for j in range(len(scene.roll_cols))
             for mode in ("constrained", "unconstrained")]
    cache = PlanCache()
    n = _thread_count(threads)
    if n > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            cells = list(pool.map(
                lambda t: run_cell(scene, t[0], t[1], t[2], cache), tasks))
    else:
        cells = [run_cell(scene, i, j, mode, cache) for i, j, mode in tasks]
    cells.sort(key=lambda c: (c.row, c.col, c.mode))
    return SweepReport(scene_name=scene.name, pitch_rows=scene.pitch_rows,
                       roll_cols=scene.roll_cols, cells=tuple(cells))


def _fmt(value, digits: int = 9) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.{digits}g}"
    return str(value)


CSV_HEADER = ("row,col,pitch_deg,roll_deg,mode,outcome,symbol,theta_max_deg,"
              "first_violation_waypoint,planner_failure,n_edges,n_waypoints,"
              "joint_distance_rad,peak_torque_left_nm,peak_torque_right_nm,"
              "min_clearance_m")


def cells_csv(report: SweepReport) -> str:
    """The sweep as CSV; stable byte-for-byte for a fixed seed."""
    lines = [CSV_HEADER]
    for c in report.cells:
        o = c.outcome
        lines.append(",".join([
            str(c.row), str(c.col),
            _fmt(math.degrees(c.pitch)), _fmt(math.degrees(c.roll)),
            c.mode, o.label, o.symbol,
            _fmt(o.theta_max_deg),
            _fmt(o.first_violation),
            o.failure or "",
            _fmt(c.n_edges), _fmt(c.n_waypoints), _fmt(c.joint_distance),
            _fmt(c.peak_torque.get("left")), _fmt(c.peak_torque.get("right")),
            _fmt(c.recheck.min_clearance if c.recheck else None),
        ]))
    return "\n".join(lines) + "\n"


def render_grid(report: SweepReport) -> str:
    """Both mode grids as fixed-width text with success rates."""
    col_heads = [f"{math.degrees(r):+.0f}" for r in report.roll_cols]
    width = max([5] + [len(h) + 2 for h in col_heads])
    out = []
    for mode in ("constrained", "unconstrained"):
        out.append(f"{mode}  (pitch rows x roll columns)")
        out.append("pitch".ljust(7) + "".join(h.rjust(width) for h in col_heads))
        grid = report.grid(mode)
        for i, pitch in enumerate(report.pitch_rows):
            head = f"{math.degrees(pitch):.0f}".ljust(7)
            out.append(head + "".join(s.rjust(width) for s in grid[i]))
        rate = report.success_rate(mode)
        shown = "n/a" if rate is None else f"{100.0 * rate:.1f}%"
        counts = report.outcome_counts(mode)
        out.append(f"success rate: {shown}  "
                   + "  ".join(f"{LABEL_SYMBOLS[k]}={v}"
                               for k, v in counts.items()))
        out.append("")
    ts = report.torque_summary()
    if ts.mean_reduction_pct is None:
        out.append("torque reduction: n/a (no cell planned in both modes)")
    else:
        per_arm = "  ".join(f"{arm}={v:.1f}%"
                            for arm, v in sorted(ts.per_arm_mean_pct.items()))
        out.append(f"torque reduction (constrained vs unconstrained, "
                   f"{ts.n_cells} cells planned in both modes): "
                   f"mean={ts.mean_reduction_pct:.1f}%  {per_arm}")
    out.append("legend: o=success  x=bend_violation  *=cable_collision  F=no_plan")
    return "\n".join(out) + "\n"
