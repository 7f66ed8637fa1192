import unittest

import numpy as np
import pytest
from scipy.spatial import ConvexHull

from .model import build_body_model
from .model_test import LENGTHS, OFFSETS, MASSES, INERTIAS
from .kinematics import forward_kinematics, solve_pose
from .gait import (BezierCurve, GaitControlPoints, GaitTask, AnkleProfile, ReferenceGait, CurveError,
                   FiniteDifferenceError, GaitSamplingError, bezier_eval, bernstein_basis, power_basis,
                   curve_lookup, ankle_profile_eval, finite_diff, sample_gait, gait_path,
                   reference_trajectory, synthetic_reference_gait, TRAJECTORY_COLUMNS)


def ground_task(**kwargs):
    return GaitTask(start=[-0.3, 0.0], land=[0.3, 0.0], step_time=2.24, r2_0=0.5, phi3_0=0.0,
                    ankle_profile=AnkleProfile(0.05, 0.30), name="ground", **kwargs)


def arc_gait(task):
    """Constant r2 and torso angle, uniform pace and a symmetric arched foot path."""
    ts = task.step_time
    times = np.linspace(0, ts, 5)
    x0, y0 = task.start
    xs, ys = task.land
    return GaitControlPoints(Pr=np.column_stack([times, np.full(5, task.r2_0)]),
                             Pphi=np.column_stack([times, np.full(5, task.phi3_0)]),
                             Pp=np.array([[x0, y0], [x0, y0 + 0.3], [(x0 + xs) / 2, (y0 + ys) / 2],
                                          [xs, ys + 0.3], [xs, ys]]),
                             Pz=np.column_stack([np.linspace(0, ts, 4), np.linspace(0, 1, 4)]))


class TestBezier(unittest.TestCase):
    def setUp(self):
        self.rs = np.random.default_rng(31)

    def test_endpoints(self):
        for rows in (4, 5):
            points = self.rs.normal(size=(rows, 2))
            curve = BezierCurve(points)
            np.testing.assert_array_equal(bezier_eval(curve, 0.0), points[0])
            np.testing.assert_array_equal(bezier_eval(curve, 1.0), points[-1])

    def test_constant_curve(self):
        curve = BezierCurve(np.tile([0.4, -1.2], (5, 1)))
        values = bezier_eval(curve, np.linspace(0, 1, 33))
        np.testing.assert_allclose(values, np.tile([0.4, -1.2], (33, 1)), rtol=1e-14)

    def test_power_basis_matches_bernstein(self):
        u = np.linspace(0, 1, 41)
        for degree in (3, 4):
            points = self.rs.normal(size=(degree + 1, 2))
            powers = u[:, None] ** np.arange(degree, -1, -1)
            np.testing.assert_allclose(powers @ power_basis(degree) @ points,
                                       bezier_eval(BezierCurve(points), u), atol=1e-12)
        np.testing.assert_allclose(bernstein_basis(4, u).sum(axis=-1), 1.0, rtol=1e-14)

    def test_convex_hull(self):
        u = np.linspace(0, 1, 51)
        for _ in range(1000):
            points = self.rs.uniform(-1, 1, size=(5, 2))
            hull = ConvexHull(points)
            samples = bezier_eval(BezierCurve(points), u)
            distance = samples @ hull.equations[:, :2].T + hull.equations[:, 2]
            assert distance.max() <= 1e-9

    def test_parameter_range(self):
        curve = BezierCurve(np.zeros((4, 2)))
        with pytest.raises(CurveError):
            bezier_eval(curve, 1.01)
        with pytest.raises(CurveError):
            bezier_eval(curve, -0.2)


class TestCurveLookup(unittest.TestCase):
    def test_sample_hit(self):
        curve = BezierCurve([[0, 0], [0.5, 2], [1.0, -1], [1.5, 0.5], [2.0, 1.0]])
        samples = bezier_eval(curve, np.linspace(0, 1, 11))
        values = curve_lookup(curve, samples[:, 0], resolution=10)
        np.testing.assert_allclose(values, samples[:, 1], rtol=1e-15, atol=1e-15)

    def test_linear_polygon(self):
        curve = BezierCurve(np.column_stack([np.linspace(0, 2, 5), np.linspace(3, 2, 5)]))
        t = np.linspace(0, 2, 37)
        np.testing.assert_allclose(curve_lookup(curve, t), 3 - t / 2, atol=1e-12)

    def test_resolution_convergence(self):
        ts = 2.0
        curve = BezierCurve(np.column_stack([np.linspace(0, ts, 5), [0.0, 1.5, -0.5, 2.0, 1.0]]))
        t = np.linspace(0.013, ts - 0.013, 97)
        exact = bezier_eval(curve, t / ts)[:, 1]
        errors = [np.abs(curve_lookup(curve, t, resolution=m) - exact).max() for m in (10, 20, 40)]
        assert errors[1] <= 0.5 * errors[0]
        assert errors[2] <= 0.5 * errors[1]

    def test_non_monotone_time(self):
        curve = BezierCurve([[0, 0], [2, 0], [-1.5, 0], [1, 0], [1, 1]])
        with pytest.raises(CurveError, match="not monotone"):
            curve_lookup(curve, 0.5)
        falling = BezierCurve([[0, 0], [1, 1], [2, -0.5], [3, 1]])
        with pytest.raises(CurveError, match="pace"):
            curve_lookup(falling, 0.5, monotone_value=True)


def test_ankle_profile():
    profile = AnkleProfile(0.05, 0.30).resolve(2.24)
    assert profile.steepness == pytest.approx(8 / 2.24)
    assert ankle_profile_eval(profile, 1.12) == pytest.approx(0.175)
    steep = AnkleProfile(0.05, 0.30, steepness=40.0, midpoint=1.12).resolve(2.24)
    assert ankle_profile_eval(steep, 0.0) == pytest.approx(0.05, abs=1e-6)
    assert ankle_profile_eval(steep, 2.24) == pytest.approx(0.30, abs=1e-6)
    values = ankle_profile_eval(profile, np.linspace(0, 2.24, 200))
    assert np.all(np.diff(values) > 0)
    with pytest.raises(ValueError):
        AnkleProfile(0.05, 0.30, midpoint=3.0).resolve(2.24)


class TestFiniteDiff(unittest.TestCase):
    def test_constant(self):
        first, second = finite_diff(np.full((20, 5), 0.7), 0.01)
        np.testing.assert_array_equal(first, 0)
        np.testing.assert_array_equal(second, 0)

    def test_linear(self):
        t = np.arange(30) * 0.02
        first, second = finite_diff(1.5 * t + 0.2, 0.02, times=t)
        np.testing.assert_allclose(first[1:], 1.5, rtol=1e-12)
        assert first[0] == 0
        np.testing.assert_allclose(second[2:], 0, atol=1e-9)

    def test_quadratic(self):
        step = 0.01
        t = np.arange(50) * step
        first, second = finite_diff(0.5 * 3.0 * t ** 2, step)
        np.testing.assert_allclose(second[2:], 3.0, rtol=1e-8)
        np.testing.assert_allclose(first[1:], 3.0 * (t[1:] - step / 2), rtol=1e-8)
        assert second[1] == pytest.approx(first[1] / step)

    def test_errors(self):
        with pytest.raises(FiniteDifferenceError):
            finite_diff(np.zeros(2), 0.1)
        with pytest.raises(FiniteDifferenceError):
            finite_diff(np.zeros(4), 0.1, times=[0, 0.1, 0.25, 0.3])


class TestControlPoints(unittest.TestCase):
    def test_vector_layout(self):
        gait = arc_gait(ground_task())
        vector = gait.to_vector()
        assert vector.size == 38
        np.testing.assert_array_equal(vector[20:22], [-0.3, 0.0])
        back = GaitControlPoints.from_vector(vector)
        np.testing.assert_array_equal(back.as_matrix(), gait.as_matrix())

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            GaitControlPoints(np.zeros((4, 2)), np.zeros((5, 2)), np.zeros((5, 2)), np.zeros((4, 2)))


class TestSampleGait(unittest.TestCase):
    def setUp(self):
        self.model = build_body_model(LENGTHS, OFFSETS, MASSES, INERTIAS)
        self.task = ground_task()
        self.gait = arc_gait(self.task)

    def test_ground_table(self):
        table = sample_gait(self.gait, self.task, self.model)
        assert table.num_rows == 101
        assert table.t[0] == 0
        assert table.t[-1] == 2.24
        np.testing.assert_allclose(table.p5[0], self.task.start, atol=1e-9)
        np.testing.assert_allclose(table.p5[-1], self.task.land, atol=1e-9)
        np.testing.assert_array_equal(table.dphi[0], 0)
        assert np.all(np.isfinite(table.torque))
        assert list(table.to_dataframe().columns) == TRAJECTORY_COLUMNS
        dataset = table.to_dataset()
        assert dataset["torque"].shape == (101, 5)

    def test_rows_follow_path(self):
        table = sample_gait(self.gait, self.task, self.model)
        path = gait_path(self.gait, self.task)
        np.testing.assert_allclose(forward_kinematics(self.model, table.phi).p5, path["p5"], atol=1e-9)
        np.testing.assert_allclose(path["p5"][50], [0.0, 0.15], atol=1e-12)

    def test_deterministic(self):
        first = sample_gait(self.gait, self.task, self.model)
        second = sample_gait(self.gait, self.task, self.model)
        np.testing.assert_array_equal(first.torque, second.torque)
        np.testing.assert_array_equal(first.phi, second.phi)

    def test_collapsed_gait(self):
        start = self.task.start
        gait = GaitControlPoints(Pr=np.tile([0, 0.5], (5, 1)), Pphi=np.zeros((5, 2)),
                                 Pp=np.tile(start, (5, 1)), Pz=np.zeros((4, 2)))
        table = sample_gait(gait, self.task, self.model)
        np.testing.assert_allclose(table.p5, np.tile(start, (101, 1)), atol=1e-9)
        np.testing.assert_allclose(table.dp5, 0, atol=1e-6)

    def test_continuity(self):
        jumps = []
        for samples in (50, 100, 200, 400):
            table = sample_gait(self.gait, ground_task(samples=samples), self.model)
            jumps.append(np.abs(np.diff(table.phi, axis=0)).max())
        assert all(b < a for a, b in zip(jumps, jumps[1:]))

    def test_failing_sample_index(self):
        gait = GaitControlPoints(self.gait.Pr, self.gait.Pphi,
                                 self.gait.Pp + np.array([[0, 0], [0, 0], [0, 2.0], [0, 0], [0, 0]]),
                                 self.gait.Pz)
        with pytest.raises(GaitSamplingError) as err:
            sample_gait(gait, self.task, self.model)
        assert 0 < err.value.index < 100

    def test_non_monotone_pace(self):
        gait = GaitControlPoints(self.gait.Pr, self.gait.Pphi, self.gait.Pp,
                                 np.array([[0, 0], [0.7, 1.0], [1.5, -0.5], [2.24, 1.0]]))
        with pytest.raises(GaitSamplingError) as err:
            sample_gait(gait, self.task, self.model)
        assert err.value.index is None
        assert isinstance(err.value.reason, CurveError)


class TestReferenceGait(unittest.TestCase):
    def setUp(self):
        self.model = build_body_model(LENGTHS, OFFSETS, MASSES, INERTIAS)
        self.task = ground_task()

    def test_validation(self):
        with pytest.raises(ValueError):
            ReferenceGait([0, 0.1, 0.1], np.zeros((3, 5)))
        with pytest.raises(ValueError):
            ReferenceGait([0, 0.1, 0.2], np.zeros((3, 4)))

    def test_resample_linear(self):
        t = np.array([0.0, 1.0, 2.0])
        theta = np.outer(t, [1, -2, 0.5, 0, 3])
        resampled = ReferenceGait(t, theta).resample(np.linspace(0, 2, 101))
        np.testing.assert_allclose(resampled.theta, np.outer(np.linspace(0, 2, 101), [1, -2, 0.5, 0, 3]),
                                   atol=1e-12)
        with pytest.raises(ValueError):
            ReferenceGait(t, theta).resample([2.5])

    def test_synthetic_endpoints(self):
        reference = synthetic_reference_gait(self.task, self.model)
        assert reference.theta.shape == (17, 5)
        assert reference.t[-1] == 2.24
        start = solve_pose(self.model, -0.3, 0.0, ankle_profile_eval(self.task.ankle_profile, 0.0), 0.0, 0.5)
        table = reference_trajectory(reference, self.task, self.model)
        np.testing.assert_allclose(table.phi[0], start, atol=1e-12)
        np.testing.assert_allclose(table.p5[0], self.task.start, atol=1e-9)
        np.testing.assert_allclose(table.p5[-1], self.task.land, atol=1e-9)
        assert table.p5[50, 1] > 0.05
        assert table.num_rows == 101
