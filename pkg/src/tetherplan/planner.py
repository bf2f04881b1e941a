"""Regrasp planning for a cable-suspended tool shared by two arms.

The planner searches a grasp graph.  Nodes are "arm X holds the tool
with grasp g while the tool rests at station S"; stations are the start
pose, a fixed set of handover poses, and the goal pose.  Edges are

  * approach: an arm moves from home to its grasp on the resting tool,
  * transfer: the holding arm carries the tool between two stations,
  * handover: at a handover station the second arm grasps the held
    tool, then the first arm withdraws to home.

Uniform-cost search orders paths by (edge count, summed joint
distance).  Edge feasibility is expensive, so edges are validated
lazily when their entry is popped; costs never change with validation,
which keeps the search optimal.  In constrained mode every waypoint
must keep the cable bend angle below the limit, and the hanging cable
is an obstacle until the tool is first grasped.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from tetherplan.cable import BalancerSpec, BendConstraint, ToolSpec, \
    bend_angle_batch, cable_capsule
from tetherplan.collision import CollisionWorld, motion_clearances
from tetherplan.geometry import Pose, compose, rot_axis_angle, unit
from tetherplan.robot import DualArm, IKOptions, N_JOINTS, fk_batch, ik_batch

ROOT = "root"


class EmptyGraspSet(Exception):
    """Grasp sampling produced no candidates."""


@dataclass(frozen=True)
class GraspCandidate:
    """A gripper TCP pose on the tool handle, in the tool frame.

    The TCP sits on the handle axis; the frame's y axis runs along the
    handle and its z axis is the approach direction.  axial is the
    distance of the grasp point from the handle start, used to keep
    handover grasps apart.
    """

    side: str
    grasp_id: int
    pose_tool: Pose
    axial: float


def sample_grasps(tool: ToolSpec, side: str, axial_samples: int = 5,
                  roll_samples: int = 12, inset: float = 0.02,
                  ) -> tuple[GraspCandidate, ...]:
    """Evenly sampled side-on grasps along the tool handle."""
    if axial_samples < 1 or roll_samples < 1:
        raise EmptyGraspSet("axial_samples and roll_samples must be at least 1")
    span = tool.handle_b - tool.handle_a
    length = float(np.linalg.norm(span))
    if length - 2.0 * inset <= 0.0:
        raise EmptyGraspSet(
            f"handle of length {length:.3f} m leaves no room inside "
            f"an inset of {inset:.3f} m")
    axis = span / length
    probe = np.array([1.0, 0.0, 0.0])
    if abs(float(axis @ probe)) > 0.9:
        probe = np.array([0.0, 1.0, 0.0])
    normal = unit(probe - (probe @ axis) * axis)
    positions = np.linspace(inset, length - inset, axial_samples)
    out = []
    for i, pos in enumerate(positions):
        point = tool.handle_a + pos * axis
        for j in range(roll_samples):
            psi = 2.0 * math.pi * j / roll_samples
            approach = rot_axis_angle(axis, psi) @ normal
            rot = np.column_stack([np.cross(axis, approach), axis, approach])
            out.append(GraspCandidate(side=side,
                                      grasp_id=i * roll_samples + j,
                                      pose_tool=Pose(rot, point),
                                      axial=float(pos)))
    return tuple(out)


@dataclass(frozen=True)
class PlannerOptions:
    axial_samples: int = 5
    roll_samples: int = 12
    grasp_inset: float = 0.02
    interp_step: float = 0.05
    min_handover_separation: float = 0.065
    max_edges: int = 20000
    time_budget: float = 60.0
    ik: IKOptions = IKOptions()


@dataclass(frozen=True)
class PlanningProblem:
    """One pick-regrasp-place instance in a fixed scene.

    world holds the static obstacles without the cable; the planner
    adds the cable itself where it applies.
    """

    robot: DualArm
    world: CollisionWorld
    balancer: BalancerSpec
    tool: ToolSpec
    constraint: BendConstraint
    start_pose: Pose
    goal_pose: Pose
    handover_poses: tuple[Pose, ...]
    home_left: np.ndarray
    home_right: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "home_left",
                           np.asarray(self.home_left, dtype=float).reshape(N_JOINTS))
        object.__setattr__(self, "home_right",
                           np.asarray(self.home_right, dtype=float).reshape(N_JOINTS))
        if not self.handover_poses:
            raise ValueError("at least one handover pose is required")

    def home(self, side: str) -> np.ndarray:
        return self.home_left if side == "left" else self.home_right


@dataclass(frozen=True)
class MotionPlan:
    """A validated waypoint path for both arms plus the carried tool."""

    mode: str
    q_left: np.ndarray
    q_right: np.ndarray
    tool_rot: np.ndarray
    tool_t: np.ndarray
    holding: tuple[tuple[tuple[str, int], ...], ...]
    theta: np.ndarray
    clearance: np.ndarray
    edge_kinds: tuple[str, ...]
    n_edges: int
    joint_distance: float

    @property
    def n_waypoints(self) -> int:
        return self.q_left.shape[0]


@dataclass
class PlannerStats:
    edges_validated: int = 0
    edges_rejected: dict = field(default_factory=dict)
    nodes_settled: int = 0
    stations_pruned: int = 0
    elapsed: float = 0.0

    def reject(self, reason: str):
        self.edges_rejected[reason] = self.edges_rejected.get(reason, 0) + 1


@dataclass(frozen=True)
class PlanResult:
    plan: MotionPlan | None
    failure: str | None
    stats: PlannerStats

    @property
    def success(self) -> bool:
        return self.plan is not None


@dataclass
class PlanCache:
    """Cross-call memo for IK solutions and edge verdicts.

    Keys are content-addressed (station pose bytes), so a cache shared
    across a parameter sweep is safe: identical queries recur whenever
    rows share a goal pose or columns share a start pose, and the
    handover stations never change.  Entries are pure-function results,
    which keeps concurrent use harmless.
    """

    node_q: dict = field(default_factory=dict)
    node_feasible: dict = field(default_factory=dict)
    edge_verdict: dict = field(default_factory=dict)


def _pose_key(pose: Pose) -> bytes:
    return np.round(pose.r, 12).tobytes() + np.round(pose.t, 12).tobytes()


def interp_joints(qa: np.ndarray, qb: np.ndarray, step: float) -> np.ndarray:
    """Linear joint interpolation, per-joint increments at most step."""
    qa = np.asarray(qa, dtype=float)
    qb = np.asarray(qb, dtype=float)
    widest = float(np.max(np.abs(qb - qa)))
    n = max(2, int(math.ceil(widest / step)) + 1)
    return np.linspace(qa, qb, n)


@dataclass
class _EdgeData:
    q_left: np.ndarray
    q_right: np.ndarray
    tool_rot: np.ndarray
    tool_t: np.ndarray
    holding: tuple
    with_cable: bool
    kind: str


class _Search:
    """Planner internals for one plan() call."""

    def __init__(self, problem: PlanningProblem, constrained: bool,
                 options: PlannerOptions, cache: PlanCache):
        self.pb = problem
        self.constrained = constrained
        self.opt = options
        self.cache = cache
        self.stats = PlannerStats()
        self.grasps = {
            side: sample_grasps(problem.tool, side, options.axial_samples,
                                options.roll_samples, options.grasp_inset)
            for side in ("left", "right")
        }
        self.stations: list[tuple[str, Pose]] = [("start", problem.start_pose)]
        self.stations += [(f"hover{k}", p)
                          for k, p in enumerate(problem.handover_poses)]
        self.stations.append(("goal", problem.goal_pose))
        self.goal_idx = len(self.stations) - 1
        self.station_keys = [name.encode() + _pose_key(pose)
                             for name, pose in self.stations]
        segs, radii, names = problem.tool.shape_segments()
        self.tool_segs = segs
        self.tool_radii = radii
        self.tool_names = names
        self.theta_station = [
            bend_angle_batch(p.r[None], p.t[None], problem.balancer,
                             problem.tool)[0]
            for _, p in self.stations
        ]
        if constrained:
            self.stats.stations_pruned = sum(
                1 for th in self.theta_station
                if th >= problem.constraint.theta_max)

    # ----- node feasibility -------------------------------------------------

    def node_configs(self, station: int, side: str) -> dict[int, np.ndarray]:
        """Feasible grasp configs at a station: gid -> joint vector."""
        key = (self.station_keys[station], side)
        hit = self.cache.node_feasible.get(key)
        if hit is not None:
            return hit
        pose = self.stations[station][1]
        grasps = self.grasps[side]
        targets_r = np.stack([compose(pose, g.pose_tool).r for g in grasps])
        targets_t = np.stack([compose(pose, g.pose_tool).t for g in grasps])
        arm = self.pb.robot.arm(side)
        sols, ok = ik_batch(arm, targets_r, targets_t, self.pb.home(side),
                            self.opt.ik)
        feasible: dict[int, np.ndarray] = {}
        idx = np.nonzero(ok)[0]
        if idx.size:
            w = idx.size
            if side == "left":
                ql = sols[idx]
                qr = np.tile(self.pb.home_right, (w, 1))
            else:
                ql = np.tile(self.pb.home_left, (w, 1))
                qr = sols[idx]
            att = self._static_tool_segments(pose, w)
            clear, _, _ = motion_clearances(
                self.pb.world, self.pb.robot, ql, qr, att, self.tool_radii,
                self.tool_names)
            for j, gid in enumerate(idx):
                if clear[j] >= 0.0:
                    feasible[int(gid)] = sols[gid]
        self.cache.node_feasible[key] = feasible
        return feasible

    def _static_tool_segments(self, pose: Pose, w: int) -> np.ndarray:
        world_segs = pose.r @ self.tool_segs.transpose(0, 2, 1)
        world_segs = world_segs.transpose(0, 2, 1) + pose.t
        return np.broadcast_to(world_segs, (w,) + world_segs.shape)

    def station_ok(self, station: int) -> bool:
        if not self.constrained:
            return True
        return self.theta_station[station] < self.pb.constraint.theta_max

    # ----- edge construction ------------------------------------------------

    def _tool_track(self, side: str, grasp: GraspCandidate, qs: np.ndarray,
                    ) -> tuple[np.ndarray, np.ndarray]:
        """Tool pose per waypoint while side holds it with grasp."""
        tcp_r, tcp_t, _ = fk_batch(self.pb.robot.arm(side), qs)
        tool_rot = tcp_r @ grasp.pose_tool.r.T
        tool_t = tcp_t - np.einsum("wij,j->wi", tool_rot, grasp.pose_tool.t)
        return tool_rot, tool_t

    def build_edge(self, spec: tuple) -> _EdgeData:
        kind = spec[0]
        if kind == "approach":
            _, side, gid = spec
            q_grasp = self.node_configs(0, side)[gid]
            qs = interp_joints(self.pb.home(side), q_grasp, self.opt.interp_step)
            w = qs.shape[0]
            if side == "left":
                ql, qr = qs, np.tile(self.pb.home_right, (w, 1))
            else:
                ql, qr = np.tile(self.pb.home_left, (w, 1)), qs
            pose = self.stations[0][1]
            rot = np.broadcast_to(pose.r, (w, 3, 3))
            t = np.broadcast_to(pose.t, (w, 3))
            holding = tuple(() if i < w - 1 else ((side, gid),) for i in range(w))
            return _EdgeData(ql, qr, rot, t, holding, self.constrained, kind)
        if kind == "transfer":
            _, src, dst, side, gid = spec
            q_from = self.node_configs(src, side)[gid]
            q_to = self.node_configs(dst, side)[gid]
            qs = interp_joints(q_from, q_to, self.opt.interp_step)
            w = qs.shape[0]
            if side == "left":
                ql, qr = qs, np.tile(self.pb.home_right, (w, 1))
            else:
                ql, qr = np.tile(self.pb.home_left, (w, 1)), qs
            grasp = self.grasps[side][gid]
            rot, t = self._tool_track(side, grasp, qs)
            holding = tuple((((side, gid),),) * w)
            return _EdgeData(ql, qr, rot, t, holding, False, kind)
        if kind == "handover":
            _, station, giver, ggid, recv, rgid = spec
            q_give = self.node_configs(station, giver)[ggid]
            q_recv = self.node_configs(station, recv)[rgid]
            seg1 = interp_joints(self.pb.home(recv), q_recv, self.opt.interp_step)
            seg2 = interp_joints(q_give, self.pb.home(giver), self.opt.interp_step)
            w1, w2 = seg1.shape[0], seg2.shape[0]
            w = w1 + w2 - 1
            if giver == "left":
                ql = np.vstack([np.tile(q_give, (w1, 1)), seg2[1:]])
                qr = np.vstack([seg1, np.tile(q_recv, (w2 - 1, 1))])
            else:
                ql = np.vstack([seg1, np.tile(q_recv, (w2 - 1, 1))])
                qr = np.vstack([np.tile(q_give, (w1, 1)), seg2[1:]])
            pose = self.stations[station][1]
            rot = np.broadcast_to(pose.r, (w, 3, 3))
            t = np.broadcast_to(pose.t, (w, 3))
            holding = []
            for i in range(w1 - 1):
                holding.append(((giver, ggid),))
            holding.append(((giver, ggid), (recv, rgid)))
            for i in range(w2 - 1):
                holding.append(((recv, rgid),))
            return _EdgeData(ql, qr, rot, t, tuple(holding), False, kind)
        raise ValueError(f"unknown edge kind {kind!r}")

    # ----- edge validation --------------------------------------------------

    def edge_key(self, spec: tuple) -> tuple:
        kind = spec[0]
        if kind == "approach":
            return (kind, spec[1], spec[2], self.station_keys[0])
        if kind == "transfer":
            return (kind, spec[3], spec[4],
                    self.station_keys[spec[1]], self.station_keys[spec[2]])
        _, station, giver, ggid, recv, rgid = spec
        return (kind, giver, ggid, recv, rgid, self.station_keys[station])

    def validate_edge(self, spec: tuple) -> tuple[bool, str | None]:
        key = (self.edge_key(spec), self.constrained)
        hit = self.cache.edge_verdict.get(key)
        if hit is not None:
            return hit
        verdict = self._validate_edge_uncached(spec)
        self.cache.edge_verdict[key] = verdict
        return verdict

    def _validate_edge_uncached(self, spec: tuple) -> tuple[bool, str | None]:
        data = self.build_edge(spec)
        bend_bad = None
        if self.constrained and data.kind == "transfer":
            theta = bend_angle_batch(data.tool_rot, data.tool_t,
                                     self.pb.balancer, self.pb.tool)
            bad = np.nonzero(theta >= self.pb.constraint.theta_max)[0]
            if bad.size:
                bend_bad = int(bad[0])
        segs = np.einsum("wij,kpj->wkpi", np.ascontiguousarray(data.tool_rot),
                         self.tool_segs) + data.tool_t[:, None, None, :]
        radii = list(self.tool_radii)
        names = list(self.tool_names)
        world = self.pb.world
        if data.with_cable:
            cable = cable_capsule(self.pb.balancer, self.stations[0][1],
                                  self.pb.tool)
            # The cable hangs off the tool itself, so their mutual
            # proximity is structural, not a collision.
            world = world.with_static("cable", cable,
                                      exclude_against=self.tool_names)
        clear, pair_idx, pair_names = motion_clearances(
            world, self.pb.robot, data.q_left, data.q_right,
            segs, radii, names)
        coll = np.nonzero(clear < 0.0)[0]
        coll_bad = int(coll[0]) if coll.size else None
        if bend_bad is not None and (coll_bad is None or bend_bad <= coll_bad):
            return False, "bend"
        if coll_bad is not None:
            pair = pair_names[pair_idx[coll_bad]]
            if "cable" in pair:
                return False, "cable_collision"
            return False, "collision"
        return True, None

    # ----- search -----------------------------------------------------------

    def successors(self, node) -> list[tuple[tuple, tuple, float]]:
        """(successor node, edge spec, edge joint distance), in fixed order."""
        out = []
        if node == ROOT:
            if not self.station_ok(0):
                return out
            for side in ("left", "right"):
                home = self.pb.home(side)
                for gid, q in sorted(self.node_configs(0, side).items()):
                    dist = float(np.linalg.norm(q - home))
                    out.append((("node", 0, side, gid),
                                ("approach", side, gid), dist))
            return out
        _, station, side, gid = node
        if station == self.goal_idx:
            return out
        q_here = self.node_configs(station, side)[gid]
        targets = []
        if station == 0:
            targets = [i for i in range(1, len(self.stations))]
        else:
            targets = [self.goal_idx]
        for dst in targets:
            if not self.station_ok(dst):
                continue
            q_dst = self.node_configs(dst, side).get(gid)
            if q_dst is None:
                continue
            dist = float(np.linalg.norm(q_dst - q_here))
            out.append((("node", dst, side, gid),
                        ("transfer", station, dst, side, gid), dist))
        if 0 < station < self.goal_idx:
            recv = "right" if side == "left" else "left"
            my_axial = self.grasps[side][gid].axial
            for rgid, q_recv in sorted(self.node_configs(station, recv).items()):
                if abs(self.grasps[recv][rgid].axial - my_axial) < \
                        self.opt.min_handover_separation:
                    continue
                dist = (float(np.linalg.norm(q_recv - self.pb.home(recv)))
                        + float(np.linalg.norm(self.pb.home(side) - q_here)))
                out.append((("node", station, recv, rgid),
                            ("handover", station, side, gid, recv, rgid), dist))
        return out

    def run(self) -> PlanResult:
        t0 = time.monotonic()
        counter = 0
        heap: list[tuple] = []
        settled: dict = {}
        parents: dict = {}
        goal_node = None
        settled[ROOT] = (0, 0.0)
        for succ, spec, dist in self.successors(ROOT):
            counter += 1
            heapq.heappush(heap, ((1, dist), counter, succ, ROOT, spec))
        failure = "exhausted"
        while heap:
            if self.stats.edges_validated >= self.opt.max_edges or \
                    time.monotonic() - t0 > self.opt.time_budget:
                failure = "budget"
                break
            (edges, dist), _, node, parent, spec = heapq.heappop(heap)
            if node in settled:
                continue
            self.stats.edges_validated += 1
            ok, reason = self.validate_edge(spec)
            if not ok:
                self.stats.reject(reason)
                continue
            settled[node] = (edges, dist)
            parents[node] = (parent, spec)
            self.stats.nodes_settled += 1
            if node[1] == self.goal_idx:
                goal_node = node
                failure = None
                break
            for succ, succ_spec, succ_dist in self.successors(node):
                if succ in settled:
                    continue
                counter += 1
                heapq.heappush(heap, ((edges + 1, dist + succ_dist), counter,
                                      succ, node, succ_spec))
        self.stats.elapsed = time.monotonic() - t0
        if goal_node is None:
            reason = failure
            if self.stats.edges_validated == 0 and failure == "exhausted":
                reason = "no_feasible_start"
            return PlanResult(plan=None, failure=reason, stats=self.stats)
        return PlanResult(plan=self._assemble(goal_node, parents, settled),
                          failure=None, stats=self.stats)

    # ----- plan assembly ----------------------------------------------------

    def _assemble(self, goal_node, parents, settled) -> MotionPlan:
        chain = []
        node = goal_node
        while node != ROOT:
            parent, spec = parents[node]
            chain.append(spec)
            node = parent
        chain.reverse()
        blocks = [self.build_edge(spec) for spec in chain]
        ql = [blocks[0].q_left]
        qr = [blocks[0].q_right]
        rot = [np.asarray(blocks[0].tool_rot)]
        t = [np.asarray(blocks[0].tool_t)]
        holding = list(blocks[0].holding)
        kinds = [blocks[0].kind]
        for blk in blocks[1:]:
            ql.append(blk.q_left[1:])
            qr.append(blk.q_right[1:])
            rot.append(np.asarray(blk.tool_rot[1:]))
            t.append(np.asarray(blk.tool_t[1:]))
            holding.extend(blk.holding[1:])
            kinds.append(blk.kind)
        q_left = np.vstack(ql)
        q_right = np.vstack(qr)
        tool_rot = np.concatenate(rot, axis=0)
        tool_t = np.concatenate(t, axis=0)
        theta = bend_angle_batch(tool_rot, tool_t, self.pb.balancer, self.pb.tool)
        segs = np.einsum("wij,kpj->wkpi", np.ascontiguousarray(tool_rot),
                         self.tool_segs) + tool_t[:, None, None, :]
        clear, _, _ = motion_clearances(self.pb.world, self.pb.robot,
                                        q_left, q_right, segs,
                                        self.tool_radii, self.tool_names)
        edges, dist = settled[goal_node]
        return MotionPlan(
            mode="constrained" if self.constrained else "unconstrained",
            q_left=q_left, q_right=q_right, tool_rot=tool_rot, tool_t=tool_t,
            holding=tuple(holding), theta=theta, clearance=clear,
            edge_kinds=tuple(kinds), n_edges=edges, joint_distance=dist)


def plan(problem: PlanningProblem, constrained: bool = True,
         options: PlannerOptions = PlannerOptions(),
         cache: PlanCache | None = None) -> PlanResult:
    """Plan a pick-(regrasp-)place motion; see the module docstring."""
    search = _Search(problem, constrained, options, cache or PlanCache())
    return search.run()
