"""Overhead-balancer cable model and the bend-angle constraint.

The tool hangs from a balancer anchored above the workspace.  A short
connector boom leaves the tool body along a fixed tool-frame direction;
the cable runs from the boom tip straight to the anchor.  The bend
angle is measured between the boom direction and the cable at the
connector: zero when the tool hangs at rest, growing as the tool tips
over.  Orientations whose bend angle reaches the limit would kink the
cable against the connector, so they are rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from tetherplan.collision import Box, Capsule, Shape, _as_segment
from tetherplan.geometry import Pose, angle_between, unit

DEFAULT_MAX_BEND = math.radians(95.0)
_EPS = 1e-9


class DegenerateCable(Exception):
    """The connector coincides with the anchor; no cable direction exists."""


@dataclass(frozen=True)
class BalancerSpec:
    """Spring balancer hanging over the workspace.

    anchor is the cable exit point in world coordinates; max_load is the
    supported mass in kilograms, which sets the cable tension.
    """

    anchor: np.ndarray
    max_load: float
    cable_radius: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "anchor", np.asarray(self.anchor, dtype=float).reshape(3))
        if not (self.max_load > 0.0):
            raise ValueError("balancer max_load must be positive")
        if not (self.cable_radius > 0.0):
            raise ValueError("cable_radius must be positive")


@dataclass(frozen=True)
class ToolSpec:
    """Suspended tool: collision bodies, grasp handle, cable connector.

    All geometry lives in the tool frame.  handle_a/handle_b span the
    graspable cylinder axis; shapes are the capsule-like collision
    bodies (boxes are rejected because attached bodies must stay
    capsule-like for the pairwise distance kernels).
    """

    connector_point: np.ndarray
    cable_dir: np.ndarray
    handle_a: np.ndarray
    handle_b: np.ndarray
    handle_radius: float
    shapes: tuple[tuple[str, Shape], ...] = ()

    def __post_init__(self):
        for name in ("connector_point", "handle_a", "handle_b"):
            object.__setattr__(self, name,
                               np.asarray(getattr(self, name), dtype=float).reshape(3))
        object.__setattr__(self, "cable_dir", unit(self.cable_dir))
        if not (self.handle_radius > 0.0):
            raise ValueError("handle_radius must be positive")
        if np.linalg.norm(self.handle_b - self.handle_a) < _EPS:
            raise ValueError("handle axis must have nonzero length")
        for name, shape in self.shapes:
            if isinstance(shape, Box):
                raise ValueError(f"tool shape {name!r}: boxes are not supported "
                                 "for attached bodies, use capsules or spheres")

    def shape_segments(self) -> tuple[np.ndarray, np.ndarray, list[str]]:
        """Tool-frame segments (K, 2, 3), radii (K,), and names."""
        segs = np.zeros((len(self.shapes), 2, 3))
        radii = np.zeros(len(self.shapes))
        names = []
        for k, (name, shape) in enumerate(self.shapes):
            a, b, r = _as_segment(shape)
            segs[k, 0] = a
            segs[k, 1] = b
            radii[k] = r
            names.append(name)
        return segs, radii, names

    def shapes_world(self, pose: Pose) -> list[tuple[str, Shape]]:
        out = []
        for name, shape in self.shapes:
            a, b, r = _as_segment(shape)
            out.append((name, Capsule(pose.apply(a), pose.apply(b), r)))
        return out


@dataclass(frozen=True)
class BendConstraint:
    """Upper bound on the cable bend angle; the bound itself violates."""

    theta_max: float = DEFAULT_MAX_BEND

    def __post_init__(self):
        if not (0.0 < self.theta_max < math.pi):
            raise ValueError("theta_max must lie strictly between 0 and pi radians")

    def violated(self, theta: float) -> bool:
        return theta >= self.theta_max


@dataclass(frozen=True)
class BendCheck:
    theta: float
    violated: bool


def bend_angle(pose: Pose, balancer: BalancerSpec, tool: ToolSpec) -> float:
    """Angle between the connector boom and the cable, in radians."""
    connector = pose.apply(tool.connector_point)
    cable = balancer.anchor - connector
    if np.linalg.norm(cable) < _EPS:
        raise DegenerateCable("tool connector sits at the balancer anchor")
    boom = pose.r @ tool.cable_dir
    return angle_between(cable, boom)


def bend_angle_batch(rot: np.ndarray, t: np.ndarray,
                     balancer: BalancerSpec, tool: ToolSpec) -> np.ndarray:
    """Vectorized bend angle for pose batches rot (W,3,3), t (W,3)."""
    connector = t + rot @ tool.connector_point
    cable = balancer.anchor[None, :] - connector
    norms = np.linalg.norm(cable, axis=1)
    if np.any(norms < _EPS):
        raise DegenerateCable("tool connector sits at the balancer anchor")
    boom = rot @ tool.cable_dir
    cos = np.einsum("wi,wi->w", cable, boom) / norms
    return np.arccos(np.clip(cos, -1.0, 1.0))


def check_bend(pose: Pose, balancer: BalancerSpec, tool: ToolSpec,
               constraint: BendConstraint = BendConstraint()) -> BendCheck:
    theta = bend_angle(pose, balancer, tool)
    return BendCheck(theta=theta, violated=constraint.violated(theta))


def cable_capsule(balancer: BalancerSpec, pose: Pose, tool: ToolSpec) -> Capsule:
    """The taut cable, anchor to connector, as a collision capsule."""
    connector = pose.apply(tool.connector_point)
    if np.linalg.norm(balancer.anchor - connector) < _EPS:
        raise DegenerateCable("tool connector sits at the balancer anchor")
    return Capsule(balancer.anchor, connector, balancer.cable_radius)
