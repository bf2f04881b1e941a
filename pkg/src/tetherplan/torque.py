"""Cable-induced joint torque along a planned motion.

The balancer cable pulls the held tool toward the anchor with a tension
set by the balancer's rated load.  For every waypoint where an arm
holds the tool, the pull at the connector maps through that arm's
point Jacobian to a six-vector of joint torques; traces summarize a
plan and comparisons quantify how much one plan's peak torque falls
below another's.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from tetherplan.cable import BalancerSpec, ToolSpec
from tetherplan.geometry import Pose, unit
from tetherplan.robot import DualArm, point_jacobian

GRAVITY = 9.81  # m/s^2


class EmptyTrace(Exception):
    """No waypoint in the plan had an arm holding the tool."""


def cable_tension(balancer: BalancerSpec) -> float:
    """Cable tension in newtons at the balancer's rated load."""
    return balancer.max_load * GRAVITY


def joint_torques(arm, q: np.ndarray, point_world: np.ndarray,
                  force_world: np.ndarray) -> np.ndarray:
    """Joint torques that balance a pure force applied at a point.

    The point is rigidly attached to the last link; the force carries
    no moment, so the torque is the transpose point Jacobian applied to
    the force.
    """
    jp = point_jacobian(arm, q, point_world)
    return jp.T @ np.asarray(force_world, dtype=float)


@dataclass(frozen=True)
class TorqueEntry:
    """Cable-induced torques on one arm at one waypoint."""

    waypoint: int
    arm: str
    torques: np.ndarray

    @property
    def magnitude(self) -> float:
        """Largest joint-torque magnitude in the entry."""
        return float(np.max(np.abs(self.torques)))


@dataclass(frozen=True)
class TorqueTrace:
    entries: tuple[TorqueEntry, ...]

    def arms(self) -> tuple[str, ...]:
        seen = []
        for e in self.entries:
            if e.arm not in seen:
                seen.append(e.arm)
        return tuple(seen)

    def peak(self, arm: str) -> float:
        mags = [e.magnitude for e in self.entries if e.arm == arm]
        if not mags:
            raise EmptyTrace(f"no entries for arm {arm!r}")
        return max(mags)


def trace_arrays(robot: DualArm, balancer: BalancerSpec, tool: ToolSpec,
                 q_left: np.ndarray, q_right: np.ndarray,
                 tool_rot: np.ndarray, tool_t: np.ndarray,
                 holding: Iterable[Iterable[tuple[str, int]]]) -> TorqueTrace:
    """Torque trace over waypoint arrays.

    holding gives, per waypoint, the (arm side, grasp id) pairs of the
    arms currently gripping the tool; each such arm gets one entry.
    """
    tension = cable_tension(balancer)
    entries: list[TorqueEntry] = []
    q_left = np.asarray(q_left, dtype=float)
    q_right = np.asarray(q_right, dtype=float)
    for w, holders in enumerate(holding):
        if not holders:
            continue
        pose = Pose(tool_rot[w], tool_t[w])
        connector = pose.apply(tool.connector_point)
        force = tension * unit(balancer.anchor - connector)
        for side, _grasp in holders:
            q = q_left[w] if side == "left" else q_right[w]
            tau = joint_torques(robot.arm(side), q, connector, force)
            entries.append(TorqueEntry(waypoint=w, arm=side, torques=tau))
    return TorqueTrace(entries=tuple(entries))


def trace_plan(plan, robot: DualArm, balancer: BalancerSpec,
               tool: ToolSpec) -> TorqueTrace:
    """Torque trace for a planned motion (see trace_arrays)."""
    return trace_arrays(robot, balancer, tool, plan.q_left, plan.q_right,
                        plan.tool_rot, plan.tool_t, plan.holding)


@dataclass(frozen=True)
class TorqueComparison:
    """Peak-torque comparison between two traces, per arm.

    reduction_pct[arm] is the percentage by which trace A's peak falls
    below trace B's: 100 * (peak_b - peak_a) / peak_b.  Arms present in
    only one trace are omitted.
    """

    peak_a: dict[str, float]
    peak_b: dict[str, float]
    reduction_pct: dict[str, float]


def compare_max_torque(trace_a: TorqueTrace, trace_b: TorqueTrace) -> TorqueComparison:
    if not trace_a.entries or not trace_b.entries:
        raise EmptyTrace("cannot compare traces without entries")
    arms = [arm for arm in trace_a.arms() if arm in trace_b.arms()]
    if not arms:
        raise EmptyTrace("traces share no arm")
    peak_a = {arm: trace_a.peak(arm) for arm in arms}
    peak_b = {arm: trace_b.peak(arm) for arm in arms}
    reduction = {arm: 100.0 * (peak_b[arm] - peak_a[arm]) / peak_b[arm]
                 for arm in arms}
    return TorqueComparison(peak_a=peak_a, peak_b=peak_b, reduction_pct=reduction)
