"""Primitive-shape distance queries and the dual-arm collision world.

Shapes are capsules, spheres and boxes.  Spheres are degenerate
capsules internally, so the only distance kernels are
segment-segment (exact closed form) and segment-box (ternary search on
the convex distance profile along the segment).  Touching counts as
free everywhere: a pair collides only when its clearance is strictly
negative.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from tetherplan.geometry import Pose
from tetherplan.robot import ArmModel, DualArm, fk_batch

_DEG_EPS = 1e-14          # squared-length threshold for degenerate segments
_TERNARY_ITERS = 64


@dataclass(frozen=True)
class Capsule:
    """Segment from a to b swept by a sphere of the given radius."""

    a: np.ndarray
    b: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        if not (self.radius > 0.0):
            raise ValueError("capsule radius must be positive")
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise ValueError("capsule endpoints must be finite")


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not (self.radius > 0.0):
            raise ValueError("sphere radius must be positive")


@dataclass(frozen=True)
class Box:
    pose: Pose
    half_extents: np.ndarray

    def __post_init__(self):
        he = np.asarray(self.half_extents, dtype=float)
        if not np.all(he > 0.0):
            raise ValueError("box half extents must be positive")
        object.__setattr__(self, "half_extents", he)


Shape = Capsule | Sphere | Box


def segment_segment_distance(p1, p2, q1, q2) -> float:
    """Exact minimum distance between closed segments [p1,p2] and [q1,q2]."""
    d = _seg_seg_batch(np.asarray(p1, float)[None], np.asarray(p2, float)[None],
                       np.asarray(q1, float)[None], np.asarray(q2, float)[None])
    return float(d[0])


def capsule_capsule_hit(a: Capsule, b: Capsule) -> bool:
    """True iff the capsules overlap; exact touching is free."""
    return segment_segment_distance(a.a, a.b, b.a, b.b) < a.radius + b.radius


def capsule_distance(a: Capsule, b: Capsule) -> float:
    """Surface clearance (negative when overlapping)."""
    return segment_segment_distance(a.a, a.b, b.a, b.b) - (a.radius + b.radius)


def segment_box_distance(p1, p2, box: Box) -> float:
    """Distance from segment to the box surface; 0 when they intersect."""
    d = _seg_box_batch(np.asarray(p1, float)[None], np.asarray(p2, float)[None], box)
    return float(d[0])


def _seg_seg_batch(p1, p2, q1, q2) -> np.ndarray:
    """Vectorized closest-distance between segment batches of shape (..., 3)."""
    d1 = p2 - p1
    d2 = q2 - q1
    r = p1 - q1
    a = np.einsum("...i,...i", d1, d1)
    e = np.einsum("...i,...i", d2, d2)
    f = np.einsum("...i,...i", d2, r)
    c = np.einsum("...i,...i", d1, r)
    b = np.einsum("...i,...i", d1, d2)

    a_deg = a <= _DEG_EPS
    e_deg = e <= _DEG_EPS
    a_safe = np.where(a_deg, 1.0, a)
    e_safe = np.where(e_deg, 1.0, e)

    denom = a * e - b * b
    denom_ok = denom > _DEG_EPS * a_safe * e_safe
    s = np.where(denom_ok,
                 np.clip((b * f - c * e) / np.where(denom_ok, denom, 1.0), 0.0, 1.0),
                 0.0)
    t = (b * s + f) / e_safe
    t_low = t < 0.0
    t_high = t > 1.0
    t = np.clip(t, 0.0, 1.0)
    s = np.where(t_low, np.clip(-c / a_safe, 0.0, 1.0), s)
    s = np.where(t_high, np.clip((b - c) / a_safe, 0.0, 1.0), s)

    # Degenerate segments override the general solution.
    s = np.where(a_deg, 0.0, s)
    t = np.where(a_deg, np.clip(f / e_safe, 0.0, 1.0), t)
    t = np.where(e_deg, 0.0, t)
    s = np.where(e_deg & ~a_deg, np.clip(-c / a_safe, 0.0, 1.0), s)

    diff = (p1 + s[..., None] * d1) - (q1 + t[..., None] * d2)
    return np.linalg.norm(diff, axis=-1)


def _point_box_local(p, half) -> np.ndarray:
    """Distance from points (..., 3) in box frame to the box surface."""
    excess = np.maximum(np.abs(p) - half, 0.0)
    return np.linalg.norm(excess, axis=-1)


def _seg_box_batch(p1, p2, box: Box) -> np.ndarray:
    """Segment-box distance, vectorized over leading axes of p1/p2.

    The point-to-box distance is convex along the segment, so a ternary
    search on the parameter converges to the minimum.
    """
    r = box.pose.r
    a = (p1 - box.pose.t) @ r
    b = (p2 - box.pose.t) @ r
    half = box.half_extents
    lo = np.zeros(a.shape[:-1])
    hi = np.ones(a.shape[:-1])
    for _ in range(_TERNARY_ITERS):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        g1 = _point_box_local(a + m1[..., None] * (b - a), half)
        g2 = _point_box_local(a + m2[..., None] * (b - a), half)
        take_left = g1 <= g2
        hi = np.where(take_left, m2, hi)
        lo = np.where(take_left, lo, m1)
    mid = 0.5 * (lo + hi)
    return _point_box_local(a + mid[..., None] * (b - a), half)


def _as_segment(shape: Shape) -> tuple[np.ndarray, np.ndarray, float]:
    if isinstance(shape, Capsule):
        return shape.a, shape.b, shape.radius
    if isinstance(shape, Sphere):
        return shape.center, shape.center, shape.radius
    raise TypeError(f"not a capsule-like shape: {shape!r}")


def shape_clearance(a: Shape, b: Shape) -> float:
    """Signed clearance between two shapes (box pairs unsupported)."""
    if isinstance(a, Box) and isinstance(b, Box):
        raise TypeError("box-box clearance is not supported")
    if isinstance(a, Box):
        return shape_clearance(b, a)
    pa, pb, ra = _as_segment(a)
    if isinstance(b, Box):
        return segment_box_distance(pa, pb, b) - ra
    qa, qb, rb = _as_segment(b)
    return segment_segment_distance(pa, pb, qa, qb) - (ra + rb)


@dataclass(frozen=True)
class ArmLinkSpec:
    """Capsule radii for the six links plus the gripper palm geometry.

    The last link capsule runs from the wrist joint to a palm point set
    back from the TCP along the tool axis, leaving the finger span
    uncovered so a closed grasp does not self-report contact.
    """

    radii: np.ndarray
    palm_setback: float = 0.07

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float).reshape(6)
        if not np.all(r > 0.0):
            raise ValueError("link radii must be positive")
        object.__setattr__(self, "radii", r)


@dataclass(frozen=True)
class CollisionReport:
    """Outcome of a collision query: every strictly-overlapping pair."""

    pairs: tuple[tuple[str, str], ...]
    min_clearance: float

    @property
    def colliding(self) -> bool:
        return bool(self.pairs)


_LINK_COUNT = 6
# Pairs of origin-array indices spanned by each link capsule; slot 7 is
# rewritten to the palm point before use.
_LINK_SPANS = ((1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7))


def link_names(side: str) -> list[str]:
    return [f"{side}/link{i + 1}" for i in range(_LINK_COUNT)]


class CollisionWorld:
    """Immutable static scene plus per-arm link geometry.

    Attachments (held or hanging objects) are per-query parameters, not
    world state; the with_static/without_static helpers return modified
    copies for obstacles that come and go, like the pre-grasp cable.
    """

    def __init__(self, statics: Mapping[str, Shape],
                 link_specs: Mapping[str, ArmLinkSpec],
                 excluded_pairs: Iterable[tuple[str, str]] = ()):
        names = list(statics)
        if len(set(names)) != len(names):
            raise ValueError("static shape names must be unique")
        self.statics: dict[str, Shape] = dict(statics)
        self.link_specs = {"left": link_specs["left"], "right": link_specs["right"]}
        self.excluded = frozenset(frozenset(p) for p in excluded_pairs)

    def with_static(self, name: str, shape: Shape,
                    exclude_against: Iterable[str] = ()) -> "CollisionWorld":
        """Copy with one more static; exclude_against lists shape names
        whose proximity to the new static is structural (for example a
        cable and the tool it suspends) and must not count as contact."""
        statics = dict(self.statics)
        statics[name] = shape
        pairs = [tuple(p) for p in self.excluded]
        pairs.extend((name, other) for other in exclude_against)
        return CollisionWorld(statics, self.link_specs, pairs)

    def without_static(self, name: str) -> "CollisionWorld":
        statics = {k: v for k, v in self.statics.items() if k != name}
        return CollisionWorld(statics, self.link_specs,
                              [tuple(p) for p in self.excluded])


def arm_link_segments(arm: ArmModel, spec: ArmLinkSpec, qs: np.ndarray) -> np.ndarray:
    """Link capsule segments for a batch of configurations: (W, 6, 2, 3)."""
    rot, tcp, origins = fk_batch(arm, qs)
    pts = origins.copy()
    pts[:, 7] = tcp - spec.palm_setback * rot[:, :, 2]
    w = pts.shape[0]
    segs = np.empty((w, _LINK_COUNT, 2, 3))
    for k, (i, j) in enumerate(_LINK_SPANS):
        segs[:, k, 0] = pts[:, i]
        segs[:, k, 1] = pts[:, j]
    return segs


@dataclass(frozen=True)
class _PairTable:
    """Precomputed query plan: which capsule/box pairs to measure."""

    cap_names: tuple[str, ...]
    cap_i: np.ndarray
    cap_j: np.ndarray
    cap_radsum: np.ndarray
    box_names: tuple[str, ...]
    box_cap_idx: np.ndarray       # capsule index per capsule-box pair
    box_box_idx: np.ndarray       # box index per capsule-box pair
    box_cap_rad: np.ndarray
    pair_names: tuple[tuple[str, str], ...]   # capsule pairs then box pairs


def _build_pair_table(world: CollisionWorld,
                      attached_names: Sequence[str],
                      attached_radii: Sequence[float],
                      holding: Sequence[str]) -> _PairTable:
    names: list[str] = []
    radii: list[float] = []
    group: list[str] = []        # "left", "right", "static", "attached"
    for side in ("left", "right"):
        names += link_names(side)
        radii += list(world.link_specs[side].radii)
        group += [side] * _LINK_COUNT
    static_caps = [(n, s) for n, s in world.statics.items() if not isinstance(s, Box)]
    static_boxes = [(n, s) for n, s in world.statics.items() if isinstance(s, Box)]
    for n, s in static_caps:
        _, _, r = _as_segment(s)
        names.append(n)
        radii.append(r)
        group.append("static")
    for n, r in zip(attached_names, attached_radii):
        names.append(n)
        radii.append(float(r))
        group.append("attached")

    wrists = {f"{side}/link{_LINK_COUNT}" for side in holding}

    def excluded(i: int, j: int) -> bool:
        gi, gj = group[i], group[j]
        if gi == gj and gi in ("static", "attached"):
            return True
        if gi == gj:  # same arm: skip adjacent links
            li = int(names[i].rsplit("link", 1)[1])
            lj = int(names[j].rsplit("link", 1)[1])
            if abs(li - lj) <= 1:
                return True
        if "attached" in (gi, gj):
            other = names[j] if gi == "attached" else names[i]
            if other in wrists:
                return True
        if frozenset((names[i], names[j])) in world.excluded:
            return True
        return False

    cap_i, cap_j, pair_names = [], [], []
    n = len(names)
    for i in range(n):
        for j in range(i + 1, n):
            if group[i] == "static" and group[j] == "static":
                continue
            if excluded(i, j):
                continue
            cap_i.append(i)
            cap_j.append(j)
            pair_names.append((names[i], names[j]))

    radii_arr = np.asarray(radii)
    box_cap_idx, box_box_idx, box_names = [], [], []
    for bi, (bname, _) in enumerate(static_boxes):
        box_names.append(bname)
        for i in range(n):
            if group[i] == "static":
                continue
            if frozenset((names[i], bname)) in world.excluded:
                continue
            box_cap_idx.append(i)
            box_box_idx.append(bi)
            pair_names.append((names[i], bname))

    return _PairTable(
        cap_names=tuple(names),
        cap_i=np.asarray(cap_i, dtype=int),
        cap_j=np.asarray(cap_j, dtype=int),
        cap_radsum=radii_arr[cap_i] + radii_arr[cap_j] if cap_i else np.zeros(0),
        box_names=tuple(box_names),
        box_cap_idx=np.asarray(box_cap_idx, dtype=int),
        box_box_idx=np.asarray(box_box_idx, dtype=int),
        box_cap_rad=radii_arr[box_cap_idx] if box_cap_idx else np.zeros(0),
        pair_names=tuple(pair_names),
    )


def motion_clearances(world: CollisionWorld, robot: DualArm,
                      q_left: np.ndarray, q_right: np.ndarray,
                      attached_segments: np.ndarray | None = None,
                      attached_radii: Sequence[float] = (),
                      attached_names: Sequence[str] = (),
                      holding: Sequence[str] = ()) -> tuple[np.ndarray, np.ndarray, tuple]:
    """Minimum clearance per waypoint over every active collision pair.

    q_left/q_right are (W, 6).  attached_segments, when given, is
    (W, K, 2, 3) world-frame segments of capsule-like attached shapes;
    holding lists the arms whose wrist link is excluded against them.

    Returns (clearance (W,), argmin pair index (W,), pair name table).
    """
    q_left = np.asarray(q_left, dtype=float).reshape(-1, 6)
    q_right = np.asarray(q_right, dtype=float).reshape(-1, 6)
    w = q_left.shape[0]
    table = _build_pair_table(world, attached_names, attached_radii, holding)

    parts = [
        arm_link_segments(robot.left, world.link_specs["left"], q_left),
        arm_link_segments(robot.right, world.link_specs["right"], q_right),
    ]
    static_caps = [s for s in world.statics.values() if not isinstance(s, Box)]
    if static_caps:
        stat = np.empty((w, len(static_caps), 2, 3))
        for k, s in enumerate(static_caps):
            a, b, _ = _as_segment(s)
            stat[:, k, 0] = a
            stat[:, k, 1] = b
        parts.append(stat)
    if attached_segments is not None and len(attached_names):
        parts.append(np.asarray(attached_segments, dtype=float))
    caps = np.concatenate(parts, axis=1)

    clearances = []
    if table.cap_i.size:
        a = caps[:, table.cap_i]
        b = caps[:, table.cap_j]
        d = _seg_seg_batch(a[:, :, 0], a[:, :, 1], b[:, :, 0], b[:, :, 1])
        clearances.append(d - table.cap_radsum[None, :])
    if table.box_cap_idx.size:
        boxes = [s for s in world.statics.values() if isinstance(s, Box)]
        cols = np.empty((w, table.box_cap_idx.size))
        for bi, box in enumerate(boxes):
            sel = table.box_box_idx == bi
            if not np.any(sel):
                continue
            seg = caps[:, table.box_cap_idx[sel]]
            d = _seg_box_batch(seg[:, :, 0], seg[:, :, 1], box)
            cols[:, sel] = d - table.box_cap_rad[sel][None, :]
        clearances.append(cols)

    if not clearances:
        return np.full(w, np.inf), np.zeros(w, dtype=int), table.pair_names
    all_clear = np.concatenate(clearances, axis=1)
    idx = np.argmin(all_clear, axis=1)
    return all_clear[np.arange(w), idx], idx, table.pair_names


def robot_in_collision(world: CollisionWorld, robot: DualArm,
                       q_left: np.ndarray, q_right: np.ndarray,
                       attached: Mapping[str, Sequence[tuple[str, Shape]]] | None = None,
                       ) -> CollisionReport:
    """Full collision report for one configuration pair.

    attached maps an arm side to named capsule-like shapes already in
    the world frame; a shape listed under both arms is checked once and
    excluded against both wrists.
    """
    attached = attached or {}
    q_left = np.asarray(q_left, dtype=float).reshape(6)
    q_right = np.asarray(q_right, dtype=float).reshape(6)
    holding = tuple(side for side in ("left", "right") if attached.get(side))
    seen: dict[str, Shape] = {}
    for side in ("left", "right"):
        for name, shape in attached.get(side, ()):
            if name not in seen:
                seen[name] = shape
    attached_names = list(seen)
    seg = None
    radii: list[float] = []
    if attached_names:
        seg = np.empty((1, len(attached_names), 2, 3))
        for k, name in enumerate(attached_names):
            a, b, r = _as_segment(seen[name])
            seg[0, k, 0] = a
            seg[0, k, 1] = b
            radii.append(r)

    table = _build_pair_table(world, attached_names, radii, holding)
    all_pairs = _all_pair_clearances(world, robot, q_left, q_right, seg, radii,
                                     attached_names, holding, table)
    hits = tuple(table.pair_names[k] for k in np.nonzero(all_pairs < 0.0)[0])
    return CollisionReport(pairs=hits, min_clearance=float(all_pairs.min(initial=np.inf)))


def _all_pair_clearances(world, robot, q_left, q_right, seg, radii,
                         attached_names, holding, table) -> np.ndarray:
    parts = [
        arm_link_segments(robot.left, world.link_specs["left"], q_left[None]),
        arm_link_segments(robot.right, world.link_specs["right"], q_right[None]),
    ]
    static_caps = [s for s in world.statics.values() if not isinstance(s, Box)]
    if static_caps:
        stat = np.empty((1, len(static_caps), 2, 3))
        for k, s in enumerate(static_caps):
            a, b, _ = _as_segment(s)
            stat[0, k, 0] = a
            stat[0, k, 1] = b
        parts.append(stat)
    if seg is not None:
        parts.append(seg)
    caps = np.concatenate(parts, axis=1)

    out = []
    if table.cap_i.size:
        a = caps[:, table.cap_i]
        b = caps[:, table.cap_j]
        d = _seg_seg_batch(a[:, :, 0], a[:, :, 1], b[:, :, 0], b[:, :, 1])
        out.append(d[0] - table.cap_radsum)
    if table.box_cap_idx.size:
        boxes = [s for s in world.statics.values() if isinstance(s, Box)]
        cols = np.empty(table.box_cap_idx.size)
        for bi, box in enumerate(boxes):
            sel = table.box_box_idx == bi
            if not np.any(sel):
                continue
            segp = caps[:, table.box_cap_idx[sel]]
            d = _seg_box_batch(segp[:, :, 0], segp[:, :, 1], box)
            cols[sel] = d[0] - table.box_cap_rad[sel]
        out.append(cols)
    if not out:
        return np.full(1, np.inf)
    return np.concatenate(out)
