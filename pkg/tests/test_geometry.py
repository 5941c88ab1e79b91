import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation, Slerp

from echotutor.geometry import (
    MovementType,
    ProbePose,
    apply_movement,
    euler_intrinsic_xyz,
    quat_about_axis,
    quat_angle,
    quat_from_euler_xyz,
    quat_multiply,
    quat_normalize,
    quat_slerp,
    quat_to_matrix,
)


def random_pose(rng):
    return ProbePose(rng.random(3), quat_normalize(rng.normal(size=4)))


def to_scipy(q):
    return Rotation.from_quat([q[1], q[2], q[3], q[0]])


class TestQuaternions:
    def test_matrix_matches_scipy(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            q = quat_normalize(rng.normal(size=4))
            assert np.allclose(quat_to_matrix(q), to_scipy(q).as_matrix(), atol=1e-12)

    def test_multiply_matches_scipy(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            a = quat_normalize(rng.normal(size=4))
            b = quat_normalize(rng.normal(size=4))
            mine = quat_to_matrix(quat_multiply(a, b))
            theirs = (to_scipy(a) * to_scipy(b)).as_matrix()
            assert np.allclose(mine, theirs, atol=1e-12)

    def test_angle_sign_invariance(self):
        rng = np.random.default_rng(2)
        q1 = quat_normalize(rng.normal(size=4))
        q2 = quat_normalize(rng.normal(size=4))
        assert quat_angle(q1, q2) == pytest.approx(quat_angle(-q1, q2), abs=1e-12)
        assert quat_angle(q1, q1) < 1e-12

    def test_slerp_matches_scipy(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            a = quat_normalize(rng.normal(size=4))
            b = quat_normalize(rng.normal(size=4))
            sl = Slerp([0.0, 1.0], Rotation.concatenate([to_scipy(a), to_scipy(b)]))
            for t in (0.0, 0.25, 0.5, 0.75, 1.0):
                mine = quat_slerp(a, b, t)
                theirs = sl(t).as_quat()
                theirs = np.array([theirs[3], theirs[0], theirs[1], theirs[2]])
                assert quat_angle(mine, theirs) < 1e-9

    def test_slerp_constant_speed(self):
        rng = np.random.default_rng(4)
        a = quat_normalize(rng.normal(size=4))
        b = quat_normalize(rng.normal(size=4))
        ts = np.linspace(0, 1, 11)
        qs = [quat_slerp(a, b, t) for t in ts]
        gaps = [quat_angle(qs[i], qs[i + 1]) for i in range(len(qs) - 1)]
        assert max(gaps) - min(gaps) < 1e-9


class TestEulerDecomposition:
    def test_recomposition(self):
        rng = np.random.default_rng(5)
        for _ in range(300):
            q = quat_normalize(rng.normal(size=4))
            rx, ry, rz, _ = euler_intrinsic_xyz(q)
            assert quat_angle(quat_from_euler_xyz(rx, ry, rz), q) < 1e-12

    def test_matches_scipy_intrinsic_xyz(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            q = quat_normalize(rng.normal(size=4))
            rx, ry, rz, gimbal = euler_intrinsic_xyz(q)
            if gimbal:
                continue
            sp = to_scipy(q).as_euler("XYZ")
            assert np.allclose([rx, ry, rz], sp, atol=1e-7)

    def test_gimbal_flagged(self):
        q = quat_about_axis(1, math.pi / 2)
        rx, ry, rz, gimbal = euler_intrinsic_xyz(q)
        assert gimbal
        assert ry == pytest.approx(math.pi / 2)
        assert quat_angle(quat_from_euler_xyz(rx, ry, rz), q) < 1e-9


class TestProbePose:
    def test_normalizes_slightly_off_quaternion(self):
        q = np.array([1.0, 0.0, 0.0, 1e-8])
        pose = ProbePose(np.zeros(3), q)
        assert np.linalg.norm(pose.orientation) == pytest.approx(1.0, abs=1e-15)

    def test_rejects_badly_scaled_quaternion(self):
        with pytest.raises(ValueError):
            ProbePose(np.zeros(3), np.array([2.0, 0.0, 0.0, 0.0]))

    def test_local_frame_convention(self):
        # identity: X lateral, Y normal, Z depth, all world-aligned
        axes = ProbePose.identity().local_axes()
        assert np.allclose(axes, np.eye(3))

    def test_immutable_arrays(self):
        pose = ProbePose.identity()
        with pytest.raises(ValueError):
            pose.position[0] = 1.0


class TestApplyMovement:
    def test_press_on_identity(self):
        pose = apply_movement(ProbePose.identity(), MovementType.PRESS, 0.1)
        assert np.allclose(pose.position, [0.0, 0.0, 0.1])
        assert quat_angle(pose.orientation, np.array([1.0, 0, 0, 0])) < 1e-15

    def test_four_quarter_rotations_identity(self):
        rng = np.random.default_rng(7)
        pose = random_pose(rng)
        out = pose
        for _ in range(4):
            out = apply_movement(out, MovementType.ROTATE, math.pi / 2)
        assert out.approx_equal(pose, 1e-9, 1e-9)

    @pytest.mark.parametrize("m", list(MovementType))
    def test_inverse(self, m):
        rng = np.random.default_rng(8 + int(m))
        pose = random_pose(rng)
        out = apply_movement(apply_movement(pose, m, 0.37), m, -0.37)
        assert out.approx_equal(pose, 1e-9, 1e-9)

    def test_rotations_are_intrinsic(self):
        # rotating about local Z after a fan must differ from world-Z rotation
        pose = apply_movement(ProbePose.identity(), MovementType.FAN, math.pi / 4)
        out = apply_movement(pose, MovementType.ROTATE, math.pi / 2)
        local_z_world = pose.local_axes()[:, 2]
        expected = quat_multiply(pose.orientation, quat_about_axis(2, math.pi / 2))
        assert quat_angle(out.orientation, expected) < 1e-12
        # and the rotation axis expressed in world coordinates is the local Z
        rel = to_scipy(quat_multiply(np.array([pose.orientation[0], *(-pose.orientation[1:])]), out.orientation))
        axis_local = rel.as_rotvec() / np.linalg.norm(rel.as_rotvec())
        assert np.allclose(pose.local_axes() @ axis_local, local_z_world, atol=1e-12)

    def test_translation_along_current_axis(self):
        pose = apply_movement(ProbePose.identity(), MovementType.ROTATE, math.pi / 2)
        out = apply_movement(pose, MovementType.SLIDE, 0.2)
        # local X now points along world +Y
        assert np.allclose(out.position - pose.position, [0.0, 0.2, 0.0], atol=1e-12)
