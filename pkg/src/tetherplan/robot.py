"""Dual-arm kinematics: forward kinematics, Jacobian, numerical IK.

An arm is a serial chain of six revolute joints.  Joint i contributes
Trans(offset_i) @ Rot(axis_i, q_i), with offset and axis expressed in
the frame left by joint i-1; a fixed flange-to-TCP pose closes the
chain.  Axes and offsets therefore equal their world values in the
zero configuration, which is how the default UR3-sized chain below is
written down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from tetherplan.geometry import Pose, compose, rot_to_rotvec, unit

N_JOINTS = 6


@dataclass(frozen=True)
class ArmModel:
    """Kinematic description of one 6-DOF arm."""

    base: Pose
    axes: np.ndarray      # (6, 3) unit joint axes, zero-config frame
    offsets: np.ndarray   # (6, 3) origin offsets, m
    lower: np.ndarray     # (6,) joint lower limits, rad
    upper: np.ndarray     # (6,) joint upper limits, rad
    tcp: Pose             # flange-to-TCP transform

    def __post_init__(self):
        axes = np.asarray(self.axes, dtype=float).reshape(N_JOINTS, 3)
        axes = axes / np.linalg.norm(axes, axis=1, keepdims=True)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "offsets",
                           np.asarray(self.offsets, dtype=float).reshape(N_JOINTS, 3))
        lower = np.asarray(self.lower, dtype=float).reshape(N_JOINTS)
        upper = np.asarray(self.upper, dtype=float).reshape(N_JOINTS)
        if np.any(lower >= upper):
            raise ValueError("joint lower limits must be strictly below upper limits")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    def with_base(self, base: Pose) -> "ArmModel":
        return replace(self, base=base)

    def in_limits(self, q: np.ndarray) -> bool:
        q = np.asarray(q, dtype=float)
        return bool(np.all(q >= self.lower - 1e-12) and np.all(q <= self.upper + 1e-12))

    @property
    def reach(self) -> float:
        """Loose upper bound on TCP distance from the base origin."""
        return float(np.sum(np.linalg.norm(self.offsets, axis=1))
                     + np.linalg.norm(self.tcp.t))


@dataclass(frozen=True)
class DualArm:
    left: ArmModel
    right: ArmModel

    def __post_init__(self):
        if np.allclose(self.left.base.t, self.right.base.t):
            raise ValueError("left and right arm bases must be distinct")

    @property
    def shoulder_separation(self) -> float:
        return float(np.linalg.norm(self.left.base.t - self.right.base.t))

    def arm(self, side: str) -> ArmModel:
        if side == "left":
            return self.left
        if side == "right":
            return self.right
        raise KeyError(f"unknown arm {side!r}")


# UR3 published link dimensions (standard DH d/a values), written as
# zero-configuration offsets and axes for the chain convention above.
_UR3_OFFSETS = np.array([
    [0.0, 0.0, 0.0],
    [0.0, 0.0, 0.1519],
    [-0.24365, 0.0, 0.0],
    [-0.21325, 0.0, 0.0],
    [0.0, -0.11235, 0.0],
    [0.0, 0.0, -0.08535],
])
_UR3_AXES = np.array([
    [0.0, 0.0, 1.0],
    [0.0, -1.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.0, 0.0, -1.0],
    [0.0, -1.0, 0.0],
])
_UR3_TCP = Pose(
    np.array([[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]]),
    np.array([0.0, -0.0819, 0.0]),
)


def ur3_arm(base: Pose = Pose.identity(), limit: float = 2.0 * math.pi) -> ArmModel:
    """UR3-sized arm with symmetric +-limit joint ranges."""
    lim = np.full(N_JOINTS, float(limit))
    return ArmModel(base=base, axes=_UR3_AXES.copy(), offsets=_UR3_OFFSETS.copy(),
                    lower=-lim, upper=lim, tcp=_UR3_TCP)


def fk(arm: ArmModel, q: np.ndarray) -> Pose:
    """TCP pose for joint angles q."""
    r = arm.base.r
    t = arm.base.t
    for i in range(N_JOINTS):
        t = t + r @ arm.offsets[i]
        r = r @ _axis_rot(arm.axes[i], float(q[i]))
    return Pose(r @ arm.tcp.r, t + r @ arm.tcp.t)


def fk_frames(arm: ArmModel, q: np.ndarray) -> tuple[Pose, np.ndarray]:
    """TCP pose plus the chain origin points.

    Returns (tcp_pose, origins) where origins has shape (8, 3): base
    origin, the six joint origins, and the TCP point.
    """
    origins = np.empty((N_JOINTS + 2, 3))
    r = arm.base.r
    t = arm.base.t
    origins[0] = t
    for i in range(N_JOINTS):
        t = t + r @ arm.offsets[i]
        origins[i + 1] = t
        r = r @ _axis_rot(arm.axes[i], float(q[i]))
    tcp = Pose(r @ arm.tcp.r, t + r @ arm.tcp.t)
    origins[-1] = tcp.t
    return tcp, origins


def fk_batch(arm: ArmModel, qs: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized fk_frames over a (W, 6) block of configurations.

    Returns (rot (W,3,3), tcp (W,3), origins (W,8,3)).  Row w agrees
    with fk_frames(arm, qs[w]) to machine precision.
    """
    qs = np.asarray(qs, dtype=float).reshape(-1, N_JOINTS)
    w = qs.shape[0]
    origins = np.empty((w, N_JOINTS + 2, 3))
    r = np.broadcast_to(arm.base.r, (w, 3, 3)).copy()
    t = np.broadcast_to(arm.base.t, (w, 3)).copy()
    origins[:, 0] = t
    for i in range(N_JOINTS):
        t = t + r @ arm.offsets[i]
        origins[:, i + 1] = t
        r = r @ _axis_rot_batch(arm.axes[i], qs[:, i])
    tcp_t = t + r @ arm.tcp.t
    tcp_r = r @ arm.tcp.r
    origins[:, -1] = tcp_t
    return tcp_r, tcp_t, origins


def fk_chain_batch(arm: ArmModel, qs: np.ndarray,
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """fk_batch plus world-frame joint axes.

    Returns (rot (W,3,3), tcp (W,3), origins (W,8,3), axes (W,6,3)).
    """
    qs = np.asarray(qs, dtype=float).reshape(-1, N_JOINTS)
    w = qs.shape[0]
    origins = np.empty((w, N_JOINTS + 2, 3))
    axes = np.empty((w, N_JOINTS, 3))
    r = np.broadcast_to(arm.base.r, (w, 3, 3)).copy()
    t = np.broadcast_to(arm.base.t, (w, 3)).copy()
    origins[:, 0] = t
    for i in range(N_JOINTS):
        t = t + r @ arm.offsets[i]
        origins[:, i + 1] = t
        axes[:, i] = r @ arm.axes[i]
        r = r @ _axis_rot_batch(arm.axes[i], qs[:, i])
    tcp_t = t + r @ arm.tcp.t
    tcp_r = r @ arm.tcp.r
    origins[:, -1] = tcp_t
    return tcp_r, tcp_t, origins, axes


def jacobian_batch(arm: ArmModel, qs: np.ndarray) -> np.ndarray:
    """Geometric TCP Jacobians (W, 6, 6), matching jacobian row for row."""
    tcp_r, tcp_t, origins, axes = fk_chain_batch(arm, qs)
    lever = tcp_t[:, None, :] - origins[:, 1:N_JOINTS + 1, :]
    linear = np.cross(axes, lever)
    jac = np.empty((linear.shape[0], 6, N_JOINTS))
    jac[:, :3, :] = linear.transpose(0, 2, 1)
    jac[:, 3:, :] = axes.transpose(0, 2, 1)
    return jac


def _rotvec_batch(rots: np.ndarray) -> np.ndarray:
    """Rotation log map for a (W, 3, 3) batch."""
    trace = np.clip(np.einsum("wii->w", rots), -1.0, 3.0)
    theta = np.arccos(np.clip(0.5 * (trace - 1.0), -1.0, 1.0))
    skew = 0.5 * np.stack([rots[:, 2, 1] - rots[:, 1, 2],
                           rots[:, 0, 2] - rots[:, 2, 0],
                           rots[:, 1, 0] - rots[:, 0, 1]], axis=1)
    sin = np.sin(theta)
    small = theta < 1e-5
    near_pi = theta > math.pi - 1e-3
    scale = np.where(small | near_pi, 1.0, theta / np.where(sin == 0.0, 1.0, sin))
    out = scale[:, None] * skew
    for idx in np.nonzero(near_pi)[0]:
        out[idx] = rot_to_rotvec(rots[idx])
    return out


def jacobian(arm: ArmModel, q: np.ndarray) -> np.ndarray:
    """Geometric TCP Jacobian, rows 0-2 linear (m/rad), rows 3-5 angular."""
    jac = np.empty((6, N_JOINTS))
    world_axes, joint_points, tcp = _chain_axes(arm, q)
    for i in range(N_JOINTS):
        z = world_axes[i]
        jac[:3, i] = np.cross(z, tcp.t - joint_points[i])
        jac[3:, i] = z
    return jac


def point_jacobian(arm: ArmModel, q: np.ndarray, point_world: np.ndarray) -> np.ndarray:
    """(3, 6) Jacobian of a point rigidly attached to the TCP body."""
    jac = np.empty((3, N_JOINTS))
    world_axes, joint_points, _ = _chain_axes(arm, q)
    p = np.asarray(point_world, dtype=float)
    for i in range(N_JOINTS):
        jac[:, i] = np.cross(world_axes[i], p - joint_points[i])
    return jac


@dataclass(frozen=True)
class IKOptions:
    pos_tol: float = 1e-4
    ori_tol: float = 1e-3
    max_iters: int = 200
    restarts: int = 8
    damping: float = 0.05
    step_clamp: float = 0.2
    seed: int = 0


def ik(arm: ArmModel, target: Pose, seed_config: np.ndarray,
       opts: IKOptions = IKOptions()) -> np.ndarray | None:
    """Damped-least-squares IK.  Returns an in-limit solution or None.

    The first attempt starts from seed_config; the remaining
    opts.restarts - 1 attempts start from uniform in-limit samples of a
    generator seeded with opts.seed, so results are reproducible.
    """
    rng = np.random.default_rng(opts.seed)
    lam2 = opts.damping * opts.damping
    q0 = np.clip(np.asarray(seed_config, dtype=float).copy(), arm.lower, arm.upper)
    for attempt in range(max(1, opts.restarts)):
        q = q0 if attempt == 0 else rng.uniform(arm.lower, arm.upper)
        q = q.copy()
        for _ in range(opts.max_iters + 1):
            cur = fk(arm, q)
            e_pos = target.t - cur.t
            e_rot = rot_to_rotvec(target.r @ cur.r.T)
            if np.linalg.norm(e_pos) < opts.pos_tol and np.linalg.norm(e_rot) < opts.ori_tol:
                return q
            jac = jacobian(arm, q)
            err = np.concatenate([e_pos, e_rot])
            try:
                y = np.linalg.solve(jac @ jac.T + lam2 * np.eye(6), err)
            except np.linalg.LinAlgError:
                break
            dq = jac.T @ y
            dq = np.clip(dq, -opts.step_clamp, opts.step_clamp)
            q = np.clip(q + dq, arm.lower, arm.upper)
    return None


def ik_batch(arm: ArmModel, target_r: np.ndarray, target_t: np.ndarray,
             seed_config: np.ndarray, opts: IKOptions = IKOptions(),
             ) -> tuple[np.ndarray, np.ndarray]:
    """Damped-least-squares IK over a batch of B targets at once.

    Mirrors ik(): every target first starts from seed_config (a single
    configuration or one row per target), then unsolved targets retry
    from uniform in-limit samples.  Returns (q (B, 6), solved (B,));
    rows with solved False hold the last iterate and are not valid.
    """
    target_r = np.asarray(target_r, dtype=float).reshape(-1, 3, 3)
    target_t = np.asarray(target_t, dtype=float).reshape(-1, 3)
    b = target_r.shape[0]
    rng = np.random.default_rng(opts.seed)
    lam2 = opts.damping * opts.damping
    eye = lam2 * np.eye(6)
    seeds = np.asarray(seed_config, dtype=float)
    if seeds.ndim == 1:
        seeds = np.broadcast_to(seeds, (b, N_JOINTS))
    q = np.clip(seeds.copy(), arm.lower, arm.upper)
    solution = np.zeros((b, N_JOINTS))
    solved = np.zeros(b, dtype=bool)
    for attempt in range(max(1, opts.restarts)):
        if attempt > 0:
            fresh = rng.uniform(arm.lower, arm.upper, (b, N_JOINTS))
            q = np.where(solved[:, None], q, fresh)
        active = ~solved
        for it in range(opts.max_iters + 1):
            idx = np.nonzero(active)[0]
            if idx.size == 0:
                break
            qa = q[idx]
            cur_r, cur_t, _, _ = fk_chain_batch(arm, qa)
            e_pos = target_t[idx] - cur_t
            e_rot = _rotvec_batch(target_r[idx] @ cur_r.transpose(0, 2, 1))
            done = ((np.linalg.norm(e_pos, axis=1) < opts.pos_tol)
                    & (np.linalg.norm(e_rot, axis=1) < opts.ori_tol))
            if np.any(done):
                hit = idx[done]
                solution[hit] = qa[done]
                solved[hit] = True
                active[hit] = False
                idx = idx[~done]
                if idx.size == 0:
                    break
                qa = qa[~done]
                e_pos = e_pos[~done]
                e_rot = e_rot[~done]
            if it == opts.max_iters:
                break
            jac = jacobian_batch(arm, qa)
            err = np.concatenate([e_pos, e_rot], axis=1)
            gram = jac @ jac.transpose(0, 2, 1) + eye
            y = np.linalg.solve(gram, err[..., None])[..., 0]
            dq = np.einsum("wji,wj->wi", jac, y)
            dq = np.clip(dq, -opts.step_clamp, opts.step_clamp)
            q[idx] = np.clip(qa + dq, arm.lower, arm.upper)
        if np.all(solved):
            break
    return solution, solved


def _axis_rot(axis: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    kx, ky, kz = axis
    khat = np.array([[0.0, -kz, ky], [kz, 0.0, -kx], [-ky, kx, 0.0]])
    return np.eye(3) + s * khat + (1.0 - c) * (khat @ khat)


def _axis_rot_batch(axis: np.ndarray, angles: np.ndarray) -> np.ndarray:
    kx, ky, kz = axis
    khat = np.array([[0.0, -kz, ky], [kz, 0.0, -kx], [-ky, kx, 0.0]])
    khat2 = khat @ khat
    c = np.cos(angles)[:, None, None]
    s = np.sin(angles)[:, None, None]
    return np.eye(3)[None] + s * khat[None] + (1.0 - c) * khat2[None]


def _chain_axes(arm: ArmModel, q: np.ndarray):
    """World joint axes and origins alongside the TCP pose."""
    world_axes = np.empty((N_JOINTS, 3))
    joint_points = np.empty((N_JOINTS, 3))
    r = arm.base.r
    t = arm.base.t
    for i in range(N_JOINTS):
        t = t + r @ arm.offsets[i]
        joint_points[i] = t
        world_axes[i] = r @ arm.axes[i]
        r = r @ _axis_rot(arm.axes[i], float(q[i]))
    tcp = Pose(r @ arm.tcp.r, t + r @ arm.tcp.t)
    return world_axes, joint_points, tcp
