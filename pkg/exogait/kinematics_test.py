import unittest

import numpy as np
import pytest

from .model import JointLimitError, build_body_model, anatomical_angles, to_relative, PoseAbs
from .model_test import LENGTHS, OFFSETS, MASSES, INERTIAS
from .kinematics import (forward_kinematics, segment_angle, phi2_range, inverse_kinematics, solve_pose,
                         IkInput, ReachabilityError)


class TestForwardKinematics(unittest.TestCase):
    def setUp(self):
        self.model = build_body_model(LENGTHS, OFFSETS, MASSES, INERTIAS)

    def test_straight_stand(self):
        joints = forward_kinematics(self.model, [0, 0, 0, np.pi, np.pi])
        np.testing.assert_allclose(joints.p5, [0, 0], atol=1e-15)
        np.testing.assert_allclose(joints.p2, [0, 0.836], atol=1e-15)
        np.testing.assert_allclose(joints.p3, [0, 0.836 + 0.714], atol=1e-15)

    def test_stacked_upward(self):
        joints = forward_kinematics(self.model, np.zeros(5))
        np.testing.assert_allclose(joints.p5, [0, 0.441 + 0.395 + 0.395 + 0.441], atol=1e-15)

    def test_link_lengths_preserved(self):
        rs = np.random.default_rng(1)
        joints = forward_kinematics(self.model, rs.uniform(-np.pi, np.pi, size=(500, 5)))
        np.testing.assert_allclose(np.linalg.norm(joints.p2 - joints.p1, axis=-1), LENGTHS[1])
        np.testing.assert_allclose(np.linalg.norm(joints.p4 - joints.p2, axis=-1), LENGTHS[3])
        np.testing.assert_allclose(np.linalg.norm(joints.p5 - joints.p4, axis=-1), LENGTHS[4])
        assert joints.as_array().shape == (500, 6, 2)


def test_segment_angle():
    assert segment_angle([0, 0], [0, 1]) == pytest.approx(0.0)
    assert segment_angle([0, 0], [1, 0]) == pytest.approx(np.pi / 2)
    assert segment_angle([0, 0], [0, -1]) == pytest.approx(np.pi)
    assert segment_angle([1, 1], [1, 2]) == pytest.approx(0.0)
    with pytest.raises(ReachabilityError, match="zero-length"):
        segment_angle([0.2, 0.3], [0.2, 0.3])


class TestPhi2Range(unittest.TestCase):
    def setUp(self):
        self.model = build_body_model(LENGTHS, OFFSETS, MASSES, INERTIAS)

    def test_target_below_ankle(self):
        low, high = phi2_range(self.model, 0.0, [0.0, 0.0])
        assert high == pytest.approx(0.0)
        assert low == pytest.approx(-np.pi / 4)

    def test_close_target_guard(self):
        phi1 = 0.1
        p1 = LENGTHS[0] * np.array([np.sin(phi1), np.cos(phi1)])
        for offset in ([0.1, -0.05], [-0.1, -0.05]):
            low, high = phi2_range(self.model, phi1, p1 + np.array(offset))
            assert high == pytest.approx(phi1)
            assert low == pytest.approx(phi1 - np.pi / 4)

    def test_range_property(self):
        rs = np.random.default_rng(2024)
        reach = LENGTHS[1] + LENGTHS[3] + LENGTHS[4]
        phi1 = rs.uniform(-0.4, 0.6, 1000)
        p1 = LENGTHS[0] * np.stack([np.sin(phi1), np.cos(phi1)], axis=-1)
        angle = rs.uniform(0, 2 * np.pi, 1000)
        radius = reach * np.sqrt(rs.uniform(0, 1, 1000))
        target = p1 + radius[:, None] * np.stack([np.cos(angle), np.sin(angle)], axis=-1)
        low, high = phi2_range(self.model, phi1, target)
        assert np.all(low <= high)
        assert np.all(high <= phi1)
        assert np.all(low >= phi1 - np.pi / 4 - 1e-15)

    def test_unreachable(self):
        with pytest.raises(ReachabilityError, match="target unreachable"):
            phi2_range(self.model, 0.0, [2.0, 0.0])
        with pytest.raises(ReachabilityError) as err:
            phi2_range(self.model, np.zeros(3), np.array([[0, 0.1], [0.2, 0], [3.0, 0]]))
        assert err.value.index == 2


class TestInverseKinematics(unittest.TestCase):
    def setUp(self):
        self.model = build_body_model(LENGTHS, OFFSETS, MASSES, INERTIAS)

    def test_straight_swing_leg(self):
        phi = solve_pose(self.model, 0.0, 0.0, 0.0, 0.0, 1.0)
        np.testing.assert_allclose(phi, [0, 0, 0, np.pi, np.pi], atol=1e-7)

    def test_round_trip(self):
        rs = np.random.default_rng(55)
        solved = 0
        for _ in range(3000):
            target = np.array([rs.uniform(-0.6, 0.6), rs.uniform(-0.2, 0.5)])
            phi1, phi3, r2 = rs.uniform(-0.3, 0.5), rs.uniform(-0.3, 0.3), rs.uniform(0, 1)
            try:
                phi = inverse_kinematics(self.model, IkInput(target, phi1, phi3, r2), check_limits=False)
            except ReachabilityError:
                continue
            solved += 1
            joints = forward_kinematics(self.model, phi)
            assert np.linalg.norm(joints.p5 - target) <= 1e-9
            assert phi[0] == phi1
            assert phi[2] == phi3
            if solved == 1000:
                break
        assert solved >= 500

    def test_r2_is_affine(self):
        target = np.array([0.2, 0.1])
        low, high = phi2_range(self.model, 0.2, target)
        for r2 in (0.0, 0.3, 1.0):
            phi = inverse_kinematics(self.model, IkInput(target, 0.2, 0.0, r2), check_limits=False)
            assert phi[1] == pytest.approx(r2 * high + (1 - r2) * low, abs=1e-15)
        extremes = [inverse_kinematics(self.model, IkInput(target, 0.2, 0.0, r2), check_limits=False)[1]
                    for r2 in (0.0, 1.0)]
        assert extremes[0] == pytest.approx(low)
        assert extremes[1] == pytest.approx(high)

    def test_knee_bends_forward(self):
        phi = solve_pose(self.model, -0.3, 0.0, 0.0545, 0.0, 0.5)
        angles = anatomical_angles(to_relative(PoseAbs(phi)).theta)
        assert angles["swing_knee"] > 0
        joints = forward_kinematics(self.model, phi)
        hip_to_foot = joints.p5 - joints.p2
        hip_to_knee = joints.p4 - joints.p2
        assert hip_to_foot[0] * hip_to_knee[1] - hip_to_foot[1] * hip_to_knee[0] > 0

    def test_vectorized_matches_scalar(self):
        targets = np.array([[-0.3, 0.0], [0.0, 0.15], [0.3, 0.0]])
        phi1 = np.array([0.0545, 0.175, 0.2955])
        batch = inverse_kinematics(self.model, IkInput(targets, phi1, np.zeros(3), np.full(3, 0.5)))
        for k in range(3):
            single = solve_pose(self.model, targets[k, 0], targets[k, 1], phi1[k], 0.0, 0.5)
            np.testing.assert_allclose(batch[k], single, atol=1e-15)

    def test_joint_limit_violation(self):
        with pytest.raises(JointLimitError) as err:
            solve_pose(self.model, 0.0, 0.0, 0.0, 1.0, 0.0)
        assert "stance_hip" in [v.joint for v in err.value.violations]
        phi = solve_pose(self.model, 0.0, 0.0, 0.0, 1.0, 0.0, check_limits=False)
        assert phi.shape == (5,)

    def test_unreachable_swing_leg(self):
        with pytest.raises(ReachabilityError):
            solve_pose(self.model, 1.2, 0.3, 0.0, 0.0, 0.5)

    def test_r2_range_checked(self):
        with pytest.raises(ValueError):
            IkInput([0, 0], 0.0, 0.0, 1.5)
