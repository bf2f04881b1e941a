import math

import numpy as np
import pytest

from oracles import central_difference_jacobian, fk_matrix_product
from tetherplan.geometry import Pose, rot_to_rotvec, rot_z
from tetherplan import robot as rb


@pytest.fixture
def arm():
    return rb.ur3_arm()


def test_fk_zero_config_hand_composed_chain(arm):
    # Chain offsets sum plus the TCP offset, orientation = TCP rotation.
    pose = rb.fk(arm, np.zeros(6))
    expected_t = np.array([
        0.0 - 0.24365 - 0.21325,
        0.0 - 0.11235 - 0.0819,
        0.1519 - 0.08535,
    ])
    assert np.allclose(pose.t, expected_t, atol=1e-12)
    assert np.allclose(pose.r, [[1, 0, 0], [0, 0, -1], [0, 1, 0]], atol=1e-12)


def test_fk_single_joint_rotation_spins_about_base_axis(arm):
    delta = 0.7
    home = rb.fk(arm, np.zeros(6))
    moved = rb.fk(arm, np.array([delta, 0, 0, 0, 0, 0]))
    spin = rot_z(delta)
    assert np.allclose(moved.t, spin @ home.t, atol=1e-12)
    assert np.allclose(moved.r, spin @ home.r, atol=1e-12)


def test_fk_matches_matrix_product_oracle(arm):
    rng = np.random.default_rng(42)
    base_m = arm.base.as_matrix()
    tcp_m = arm.tcp.as_matrix()
    for _ in range(50):
        q = rng.uniform(-math.pi, math.pi, size=6)
        expected = fk_matrix_product(base_m, arm.axes, arm.offsets, tcp_m, q)
        got = rb.fk(arm, q)
        assert np.allclose(got.as_matrix(), expected, atol=1e-9)


def test_fk_matches_published_dh_table(arm):
    # Same robot written in the standard DH convention; independent of
    # the chain representation used by the library.
    dh = [  # (a, alpha, d)
        (0.0, math.pi / 2, 0.1519),
        (-0.24365, 0.0, 0.0),
        (-0.21325, 0.0, 0.0),
        (0.0, math.pi / 2, 0.11235),
        (0.0, -math.pi / 2, 0.08535),
        (0.0, 0.0, 0.0819),
    ]

    def dh_fk(q):
        t = np.eye(4)
        for (a, al, d), th in zip(dh, q):
            ct, st = math.cos(th), math.sin(th)
            ca, sa = math.cos(al), math.sin(al)
            t = t @ np.array([
                [ct, -st * ca, st * sa, a * ct],
                [st, ct * ca, -ct * sa, a * st],
                [0.0, sa, ca, d],
                [0.0, 0.0, 0.0, 1.0],
            ])
        return t

    rng = np.random.default_rng(7)
    for _ in range(50):
        q = rng.uniform(-math.pi, math.pi, size=6)
        assert np.allclose(rb.fk(arm, q).as_matrix(), dh_fk(q), atol=1e-9)


def test_fk_batch_agrees_with_scalar(arm):
    rng = np.random.default_rng(5)
    qs = rng.uniform(-math.pi, math.pi, size=(25, 6))
    rot, tcp, origins = rb.fk_batch(arm, qs)
    for w in range(qs.shape[0]):
        pose, pts = rb.fk_frames(arm, qs[w])
        assert np.allclose(rot[w], pose.r, atol=1e-12)
        assert np.allclose(tcp[w], pose.t, atol=1e-12)
        assert np.allclose(origins[w], pts, atol=1e-12)


def test_fk_deterministic(arm):
    q = np.array([0.3, -1.1, 0.7, 0.2, -0.4, 1.9])
    a = rb.fk(arm, q)
    b = rb.fk(arm, q)
    assert np.array_equal(a.r, b.r) and np.array_equal(a.t, b.t)


def _pose_function(arm):
    def f(q):
        return rb.fk(arm, q).t
    return f


def _orientation_columns_ok(arm, q):
    jac = rb.jacobian(arm, q)
    axes, _, _ = rb._chain_axes(arm, q)
    return np.allclose(jac[3:, :], axes.T, atol=1e-12)


def test_jacobian_zero_config_finite_difference(arm):
    q = np.zeros(6)
    jac = rb.jacobian(arm, q)
    fd = central_difference_jacobian(_pose_function(arm), q)
    scale = max(1.0, np.abs(fd).max())
    assert np.max(np.abs(jac[:3] - fd)) / scale < 1e-4


def test_jacobian_angular_rows_are_world_axes(arm):
    rng = np.random.default_rng(3)
    for _ in range(10):
        assert _orientation_columns_ok(arm, rng.uniform(-math.pi, math.pi, 6))


def test_jacobian_random_configs_vs_finite_difference(arm):
    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(100):
        q = rng.uniform(-math.pi, math.pi, size=6)
        jac = rb.jacobian(arm, q)
        fd_lin = central_difference_jacobian(_pose_function(arm), q)

        def rotvec_about(qq, base=rb.fk(arm, q).r):
            return rot_to_rotvec(rb.fk(arm, qq).r @ base.T)

        fd_ang = central_difference_jacobian(rotvec_about, q)
        fd = np.vstack([fd_lin, fd_ang])
        scale = max(1.0, np.abs(fd).max())
        worst = max(worst, float(np.max(np.abs(jac - fd)) / scale))
    assert worst < 1e-4


def test_ik_fixed_point_returns_seed(arm):
    q0 = np.array([0.4, -1.2, 1.0, -0.5, 0.8, 0.1])
    target = rb.fk(arm, q0)
    got = rb.ik(arm, target, q0)
    assert got is not None
    assert np.allclose(got, q0, atol=1e-12)


def test_ik_round_trip_random_targets(arm):
    rng = np.random.default_rng(2024)
    opts = rb.IKOptions(seed=9)
    hits = 0
    trials = 40
    for _ in range(trials):
        q0 = rng.uniform(-math.pi, math.pi, size=6)
        target = rb.fk(arm, q0)
        seed = rng.uniform(-math.pi, math.pi, size=6)
        q = rb.ik(arm, target, seed, opts)
        if q is None:
            continue
        got = rb.fk(arm, q)
        assert np.linalg.norm(got.t - target.t) < 1e-4
        assert np.linalg.norm(rot_to_rotvec(target.r @ got.r.T)) < 1e-3
        assert arm.in_limits(q)
        hits += 1
    assert hits >= int(0.95 * trials)


def test_ik_unreachable_target_returns_none(arm):
    target = Pose(np.eye(3), np.array([10.0, 0.0, 0.0]))
    opts = rb.IKOptions(restarts=2, max_iters=50)
    assert rb.ik(arm, target, np.zeros(6), opts) is None


def test_ik_respects_tight_limits():
    lim = np.full(6, math.pi / 2)
    arm = rb.ArmModel(base=Pose.identity(), axes=rb._UR3_AXES.copy(),
                      offsets=rb._UR3_OFFSETS.copy(), lower=-lim, upper=lim,
                      tcp=rb._UR3_TCP)
    rng = np.random.default_rng(31)
    for _ in range(10):
        q0 = rng.uniform(-math.pi / 2, math.pi / 2, size=6)
        q = rb.ik(arm, rb.fk(arm, q0), rng.uniform(-1, 1, 6), rb.IKOptions(seed=3))
        if q is not None:
            assert arm.in_limits(q)


def test_dual_arm_requires_distinct_bases(arm):
    with pytest.raises(ValueError):
        rb.DualArm(left=arm, right=arm)
    other = arm.with_base(Pose(np.eye(3), np.array([0.0, -0.4, 0.0])))
    pair = rb.DualArm(left=arm.with_base(Pose(np.eye(3), np.array([0.0, 0.4, 0.0]))),
                      right=other)
    assert pair.shoulder_separation == pytest.approx(0.8)


def test_fk_chain_batch_matches_fk_batch(arm):
    rng = np.random.default_rng(40)
    qs = rng.uniform(-2.0, 2.0, (20, 6))
    r0, t0, o0 = rb.fk_batch(arm, qs)
    r1, t1, o1, axes = rb.fk_chain_batch(arm, qs)
    assert np.allclose(r0, r1)
    assert np.allclose(t0, t1)
    assert np.allclose(o0, o1)
    assert axes.shape == (20, 6, 3)
    assert np.allclose(np.linalg.norm(axes, axis=2), 1.0)


def test_jacobian_batch_matches_scalar(arm):
    rng = np.random.default_rng(41)
    qs = rng.uniform(-2.0, 2.0, (15, 6))
    jb = rb.jacobian_batch(arm, qs)
    for w in range(15):
        assert np.allclose(jb[w], rb.jacobian(arm, qs[w]), atol=1e-12)


def test_rotvec_batch_matches_scalar():
    from tetherplan.geometry import rot_to_rotvec, rpy_to_rot, rot_axis_angle
    rng = np.random.default_rng(42)
    rots = [rpy_to_rot(*rng.uniform(-math.pi, math.pi, 3)) for _ in range(60)]
    # Include identity and near-half-turn rotations.
    rots.append(np.eye(3))
    rots.append(rot_axis_angle(np.array([0.0, 0.0, 1.0]), math.pi - 1e-7))
    rots.append(rot_axis_angle(np.array([1.0, 1.0, 0.0]) / math.sqrt(2), math.pi))
    rots = np.stack(rots)
    batch = rb._rotvec_batch(rots)
    for i in range(rots.shape[0]):
        v = rot_to_rotvec(rots[i])
        # The half-turn log map is sign-ambiguous; compare reconstructions.
        same = np.allclose(batch[i], v, atol=1e-6)
        flipped = np.allclose(batch[i], -v, atol=1e-6)
        assert same or flipped


def test_ik_batch_solves_reachable_targets(arm):
    rng = np.random.default_rng(43)
    qs = rng.uniform(-1.2, 1.2, (30, 6))
    rots, ts, _ = rb.fk_batch(arm, qs)
    opts = rb.IKOptions(seed=5)
    sol, ok = rb.ik_batch(arm, rots, ts, np.zeros(6), opts)
    assert ok.sum() >= 28
    for i in np.nonzero(ok)[0]:
        pose = rb.fk(arm, sol[i])
        assert np.linalg.norm(pose.t - ts[i]) < opts.pos_tol
        from tetherplan.geometry import rot_to_rotvec
        assert np.linalg.norm(rot_to_rotvec(rots[i] @ pose.r.T)) < opts.ori_tol
        assert arm.in_limits(sol[i])


def test_ik_batch_is_deterministic(arm):
    rng = np.random.default_rng(44)
    qs = rng.uniform(-1.0, 1.0, (10, 6))
    rots, ts, _ = rb.fk_batch(arm, qs)
    s1, ok1 = rb.ik_batch(arm, rots, ts, np.zeros(6), rb.IKOptions(seed=9))
    s2, ok2 = rb.ik_batch(arm, rots, ts, np.zeros(6), rb.IKOptions(seed=9))
    assert np.array_equal(ok1, ok2)
    assert np.array_equal(s1, s2)


def test_ik_batch_flags_unreachable(arm):
    rots = np.stack([np.eye(3), np.eye(3)])
    ts = np.array([[10.0, 0.0, 0.0], [0.3, 0.1, 0.4]])
    sol, ok = rb.ik_batch(arm, rots, ts, np.zeros(6),
                          rb.IKOptions(restarts=2, max_iters=60, seed=1))
    assert not ok[0]


def test_ik_batch_per_target_seed_rows(arm):
    rng = np.random.default_rng(45)
    qs = rng.uniform(-1.0, 1.0, (6, 6))
    rots, ts, _ = rb.fk_batch(arm, qs)
    sol, ok = rb.ik_batch(arm, rots, ts, qs, rb.IKOptions(seed=2))
    assert ok.all()
    # Seeding each row with its own exact solution must return it unchanged.
    assert np.allclose(sol, qs)
