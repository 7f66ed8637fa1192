"""
Bezier gait description and sampling of the full joint space swing trajectory.

A gait is described by four Bezier curves: r2(t) and phi3(t) as quartics in (t, value), the swing
foot path (x5, y5) as a quartic in the pace variable z, and the pace z(t) as a cubic in (t, z). The
stance ankle follows a fixed logistic profile.
"""
import logging
from dataclasses import dataclass, fields

import numpy as np
import pandas as pd
import xarray as xr
from scipy.special import comb, expit

from .model import (NUM_LINKS, PoseAbs, PoseRel, JointLimitError, to_absolute, to_relative,
                    joint_limit_mask, validate_joint_limits)
from .dynamics import coupling_coefficients, torque_relative
from .kinematics import IkInput, ReachabilityError, forward_kinematics, inverse_kinematics

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 100
DEFAULT_RESOLUTION = 1000
DEFAULT_CONTACT_RADIUS = 0.002

# power basis matrices acting on descending powers [u^n, ..., u, 1]
QUARTIC_BASIS = np.array([[1, -4, 6, -4, 1],
                          [-4, 12, -12, 4, 0],
                          [6, -12, 6, 0, 0],
                          [-4, 4, 0, 0, 0],
                          [1, 0, 0, 0, 0]], dtype=float)
CUBIC_BASIS = np.array([[-1, 3, -3, 1],
                        [3, -6, 3, 0],
                        [-3, 3, 0, 0],
                        [1, 0, 0, 0]], dtype=float)

ANGLE_COLUMNS = [f"theta{i}" for i in range(1, NUM_LINKS + 1)]
TRAJECTORY_COLUMNS = (["t"] + ANGLE_COLUMNS + [f"phi{i}" for i in range(1, NUM_LINKS + 1)]
                      + ["x5", "y5", "vx5", "vy5"] + [f"T{i}" for i in range(1, NUM_LINKS + 1)])


class CurveError(ValueError):
    pass


class FiniteDifferenceError(ValueError):
    pass


class GaitSamplingError(ValueError):
    """
    A sample of the gait could not be computed.

    Attributes:
        index: failing sample index k, or None when the failure is not tied to one sample
        reason: the underlying exception
    """
    def __init__(self, index, reason):
        self.index = index
        self.reason = reason
        where = "gait" if index is None else f"sample {index}"
        super().__init__(f"{where}: {reason}")


@dataclass(frozen=True)
class BezierCurve:
    """
    Planar Bezier curve. control_points has shape (degree + 1, 2).
    """
    control_points: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.control_points, dtype=float)
        if points.ndim != 2 or points.shape[1] != 2 or points.shape[0] < 2:
            raise CurveError(f"control points must have shape (n, 2), got {points.shape}")
        object.__setattr__(self, "control_points", points)

    @property
    def degree(self):
        return self.control_points.shape[0] - 1


def bernstein_basis(degree, u):
    """
    Bernstein polynomials of the given degree at u, shape (..., degree + 1).
    """
    u = np.asarray(u, dtype=float)[..., None]
    i = np.arange(degree + 1)
    return comb(degree, i) * u ** i * (1 - u) ** (degree - i)


def power_basis(degree):
    """
    Matrix M with curve(u) = [u^n, ..., u, 1] @ M @ P for degree 3 or 4.
    """
    if degree == 4:
        return QUARTIC_BASIS
    if degree == 3:
        return CUBIC_BASIS
    raise CurveError(f"no power basis matrix for degree {degree}")


def bezier_eval(curve, u):
    """
    Evaluate a Bezier curve.

    Args:
        curve: BezierCurve
        u: parameter value(s) in [0, 1]

    Returns:
        points of shape (..., 2)
    """
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or np.any(u > 1) or not np.all(np.isfinite(u)):
        raise CurveError("curve parameter outside [0, 1]")
    return bernstein_basis(curve.degree, u) @ curve.control_points


def curve_lookup(curve, t, resolution=DEFAULT_RESOLUTION, monotone_value=False):
    """
    Value of a (time, value) Bezier curve at time t. The curve is sampled at resolution + 1
    uniformly spaced parameters and the value is linearly interpolated in time.

    Args:
        curve: BezierCurve whose first coordinate is time
        t: time(s) in s
        resolution: number of parameter intervals M
        monotone_value: also require the value coordinate to be non-decreasing

    Returns:
        value(s) with the shape of t
    """
    if resolution < 1:
        raise CurveError(f"resolution must be positive, got {resolution}")
    samples = bezier_eval(curve, np.linspace(0.0, 1.0, resolution + 1))
    if np.any(np.diff(samples[:, 0]) < 0):
        raise CurveError("time reparameterization not monotone")
    if monotone_value and np.any(np.diff(samples[:, 1]) < 0):
        raise CurveError("pace not monotone")
    return np.interp(t, samples[:, 0], samples[:, 1])


@dataclass(frozen=True)
class AnkleProfile:
    """
    Logistic stance ankle angle phi1(t) = phi1_start + (phi1_end - phi1_start) * sigma(k (t - t_mid)).
    steepness and midpoint default to 8 / t_s and t_s / 2 when the task resolves them.
    """
    phi1_start: float
    phi1_end: float
    steepness: float = None
    midpoint: float = None

    def resolve(self, step_time):
        steepness = 8.0 / step_time if self.steepness is None else self.steepness
        midpoint = step_time / 2.0 if self.midpoint is None else self.midpoint
        if not steepness > 0:
            raise ValueError(f"ankle steepness must be positive, got {steepness}")
        if not 0 < midpoint < step_time:
            raise ValueError(f"ankle midpoint {midpoint} outside (0, {step_time})")
        return AnkleProfile(float(self.phi1_start), float(self.phi1_end), float(steepness), float(midpoint))


def ankle_profile_eval(profile, t):
    """
    Stance ankle absolute angle phi1 at time(s) t.
    """
    steepness = profile.steepness
    midpoint = profile.midpoint
    if steepness is None or midpoint is None:
        raise ValueError("ankle profile has unresolved steepness or midpoint")
    t = np.asarray(t, dtype=float)
    return profile.phi1_start + (profile.phi1_end - profile.phi1_start) * expit(steepness * (t - midpoint))


@dataclass(frozen=True)
class GaitTask:
    """
    One swing step to plan.

    Attributes:
        start: swing foot position p5(0) in m
        land: landing position p5(t_s) in m
        step_time: t_s in s
        r2_0: stance thigh ratio at t = 0
        phi3_0: torso angle at t = 0 in rad
        ankle_profile: AnkleProfile, resolved against step_time on construction
        samples: N, the gait is sampled at N + 1 times
        resolution: M, parameter samples per curve lookup
        penalty_weight: v_p, weight of the peak swing foot speed in the cost
        contact_radius: distance from start or land within which the swing foot counts as touching
        max_foot_speed: optional ceiling on the peak swing foot speed in m/s; faster gaits are
            infeasible
        name: label used in logs and reports
    """
    start: np.ndarray
    land: np.ndarray
    step_time: float
    r2_0: float
    phi3_0: float
    ankle_profile: AnkleProfile
    samples: int = DEFAULT_SAMPLES
    resolution: int = DEFAULT_RESOLUTION
    penalty_weight: float = 0.0
    contact_radius: float = DEFAULT_CONTACT_RADIUS
    max_foot_speed: float = None
    name: str = "task"

    def __post_init__(self):
        for name in ("start", "land"):
            point = np.asarray(getattr(self, name), dtype=float)
            if point.shape != (2,) or not np.all(np.isfinite(point)):
                raise ValueError(f"{name} must be a finite 2-vector, got {point}")
            object.__setattr__(self, name, point)
        if not self.step_time > 0:
            raise ValueError(f"step_time must be positive, got {self.step_time}")
        if self.samples < 10:
            raise ValueError(f"samples must be at least 10, got {self.samples}")
        if self.resolution < 1:
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        if not self.contact_radius > 0:
            raise ValueError(f"contact_radius must be positive, got {self.contact_radius}")
        if self.penalty_weight < 0:
            raise ValueError(f"penalty_weight must be non-negative, got {self.penalty_weight}")
        if self.max_foot_speed is not None and not self.max_foot_speed > 0:
            raise ValueError(f"max_foot_speed must be positive, got {self.max_foot_speed}")
        if not 0 <= self.r2_0 <= 1:
            raise ValueError(f"r2_0 must lie in [0, 1], got {self.r2_0}")
        object.__setattr__(self, "ankle_profile", self.ankle_profile.resolve(self.step_time))

    @property
    def sample_times(self):
        return np.linspace(0.0, self.step_time, self.samples + 1)

    @property
    def time_step(self):
        return self.step_time / self.samples


@dataclass(frozen=True)
class GaitControlPoints:
    """
    The 19 control points of a gait: Pr (5, 2) as (t, r2), Pphi (5, 2) as (t, phi3), Pp (5, 2) as
    (x5, y5) and Pz (4, 2) as (t, z). The flat parameter vector stacks the rows in that order.
    """
    Pr: np.ndarray
    Pphi: np.ndarray
    Pp: np.ndarray
    Pz: np.ndarray

    BLOCK_ROWS = {"Pr": 5, "Pphi": 5, "Pp": 5, "Pz": 4}

    def __post_init__(self):
        for name, rows in self.BLOCK_ROWS.items():
            block = np.array(getattr(self, name), dtype=float)
            if block.shape != (rows, 2):
                raise ValueError(f"{name} must have shape ({rows}, 2), got {block.shape}")
            object.__setattr__(self, name, block)

    def as_matrix(self):
        return np.vstack([self.Pr, self.Pphi, self.Pp, self.Pz])

    def to_vector(self):
        return self.as_matrix().ravel()

    @classmethod
    def from_matrix(cls, matrix):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != (19, 2):
            raise ValueError(f"control point matrix must have shape (19, 2), got {matrix.shape}")
        return cls(Pr=matrix[0:5], Pphi=matrix[5:10], Pp=matrix[10:15], Pz=matrix[15:19])

    @classmethod
    def from_vector(cls, vector):
        return cls.from_matrix(np.asarray(vector, dtype=float).reshape(19, 2))

    @property
    def r_curve(self):
        return BezierCurve(self.Pr)

    @property
    def phi_curve(self):
        return BezierCurve(self.Pphi)

    @property
    def path_curve(self):
        return BezierCurve(self.Pp)

    @property
    def pace_curve(self):
        return BezierCurve(self.Pz)


@dataclass(frozen=True)
class TrajectoryTable:
    """
    Sampled swing trajectory with N + 1 rows. Angle arrays have shape (N + 1, 5), foot arrays
    (N + 1, 2). torque holds the relative joint torques, column 0 being the stance ankle.
    """
    t: np.ndarray
    theta: np.ndarray
    dtheta: np.ndarray
    ddtheta: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    ddphi: np.ndarray
    p5: np.ndarray
    dp5: np.ndarray
    torque: np.ndarray

    @property
    def num_rows(self):
        return self.t.size

    @property
    def ankle_torque(self):
        return self.torque[:, 0]

    @property
    def foot_speed(self):
        return np.linalg.norm(self.dp5, axis=-1)

    def to_dataframe(self):
        data = np.hstack([self.t[:, None], self.theta, self.phi, self.p5, self.dp5, self.torque])
        return pd.DataFrame(data, columns=TRAJECTORY_COLUMNS)

    def to_dataset(self):
        """
        Labelled xarray view of the table with sample, link and axis dimensions.
        """
        coords = {"t": ("sample", self.t), "link": np.arange(1, NUM_LINKS + 1), "axis": ["x", "y"]}
        variables = {}
        for f in fields(self):
            if f.name == "t":
                continue
            value = getattr(self, f.name)
            dims = ("sample", "axis") if value.shape[-1] == 2 else ("sample", "link")
            variables[f.name] = (dims, value)
        return xr.Dataset(variables, coords=coords)


def finite_diff(series, step, times=None):
    """
    Backward difference derivatives. The first derivative at k = 0 and the second derivative at
    k = 0 are zero, the gait starting at rest.

    Args:
        series: array (n, ...) sampled at uniform step
        step: sampling interval K in s
        times: optional sample times checked for uniform spacing

    Returns:
        first, second derivative arrays shaped like series
    """
    series = np.asarray(series, dtype=float)
    if series.shape[0] < 3:
        raise FiniteDifferenceError(f"need at least 3 samples, got {series.shape[0]}")
    if not step > 0:
        raise FiniteDifferenceError(f"step must be positive, got {step}")
    if times is not None and not np.allclose(np.diff(times), step, rtol=1e-9, atol=0):
        raise FiniteDifferenceError("samples are not uniformly spaced")
    first = np.zeros_like(series)
    first[1:] = (series[1:] - series[:-1]) / step
    second = np.zeros_like(series)
    second[1:] = (first[1:] - first[:-1]) / step
    return first, second


def _first_limit_violation(theta, model):
    mask = joint_limit_mask(theta, model)
    if not np.any(mask):
        return None
    index = int(np.flatnonzero(mask)[0])
    return index, JointLimitError(validate_joint_limits(PoseRel(theta[index]), model))


def _trajectory_from_angles(t, phi, model, step):
    phi = np.unwrap(phi, axis=0)
    dphi, ddphi = finite_diff(phi, step, times=t)
    pose = PoseAbs(phi, dphi, ddphi)
    relative = to_relative(pose)
    torque = torque_relative(model, pose, coefficients=coupling_coefficients(model)).values
    p5 = forward_kinematics(model, phi).p5
    dp5, _ = finite_diff(p5, step)
    return TrajectoryTable(t=t, theta=relative.theta, dtheta=relative.dtheta, ddtheta=relative.ddtheta,
                           phi=phi, dphi=dphi, ddphi=ddphi, p5=p5, dp5=dp5, torque=torque)


def gait_path(control_points, task):
    """
    Commanded gait variables at the task sample times.

    Returns:
        dict with t, r2, phi3, z, phi1 and p5
    """
    t = task.sample_times
    m = task.resolution
    r2 = np.clip(curve_lookup(control_points.r_curve, t, m), 0.0, 1.0)
    phi3 = curve_lookup(control_points.phi_curve, t, m)
    z = np.clip(curve_lookup(control_points.pace_curve, t, m, monotone_value=True), 0.0, 1.0)
    p5 = bezier_eval(control_points.path_curve, z)
    phi1 = ankle_profile_eval(task.ankle_profile, t)
    return {"t": t, "r2": r2, "phi3": phi3, "z": z, "phi1": phi1, "p5": p5}


def sample_gait(control_points, task, model, check_limits=True):
    """
    Sample a gait at N + 1 uniformly spaced times, solve the inverse kinematics of every sample and
    evaluate the joint torques along the trajectory.

    Args:
        control_points: GaitControlPoints
        task: GaitTask
        model: BodyModel
        check_limits: reject samples outside the human joint range

    Returns:
        TrajectoryTable

    Raises:
        GaitSamplingError: wraps the curve, reachability or joint limit failure
    """
    try:
        path = gait_path(control_points, task)
    except CurveError as err:
        raise GaitSamplingError(None, err) from err
    try:
        phi = inverse_kinematics(model, IkInput(path["p5"], path["phi1"], path["phi3"], path["r2"]),
                                 check_limits=False)
    except ReachabilityError as err:
        raise GaitSamplingError(err.index, err) from err
    if check_limits:
        failure = _first_limit_violation(to_relative(PoseAbs(phi)).theta, model)
        if failure is not None:
            raise GaitSamplingError(failure[0], failure[1])
    table = _trajectory_from_angles(path["t"], phi, model, task.time_step)
    logger.debug("sampled %s: %d rows, peak ankle torque %.3f", task.name, table.num_rows,
                 np.abs(table.ankle_torque).max())
    return table


@dataclass(frozen=True)
class ReferenceGait:
    """
    Joint space reference gait: sample times (n,) and relative angles (n, 5) in radians.
    """
    t: np.ndarray
    theta: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        theta = np.asarray(self.theta, dtype=float)
        if t.ndim != 1 or theta.shape != (t.size, NUM_LINKS):
            raise ValueError(f"reference gait needs times (n,) and angles (n, {NUM_LINKS})")
        if t.size < 2 or np.any(np.diff(t) <= 0):
            raise ValueError("reference gait times must be strictly increasing")
        if not np.all(np.isfinite(theta)) or not np.all(np.isfinite(t)):
            raise ValueError("reference gait contains non-finite values")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "theta", theta)

    def resample(self, times):
        """
        Linear interpolation of the joint angles at new times inside the recorded span.
        """
        times = np.asarray(times, dtype=float)
        span = self.t[-1] - self.t[0]
        if times.min() < self.t[0] - 1e-12 * span or times.max() > self.t[-1] + 1e-12 * span:
            raise ValueError(f"resample times outside [{self.t[0]}, {self.t[-1]}]")
        theta = np.stack([np.interp(times, self.t, self.theta[:, i]) for i in range(NUM_LINKS)], axis=-1)
        return ReferenceGait(times, theta, self.provenance)


def reference_trajectory(reference, task, model):
    """
    Replay a joint space reference gait on the task sample grid through the same derivative and
    torque pipeline as sample_gait. The reference is stretched to the task step time.

    Args:
        reference: ReferenceGait
        task: GaitTask
        model: BodyModel

    Returns:
        TrajectoryTable
    """
    t = task.sample_times
    scaled = ReferenceGait((reference.t - reference.t[0]) * task.step_time / (reference.t[-1] - reference.t[0]),
                           reference.theta, reference.provenance)
    resampled = scaled.resample(t)
    phi = to_absolute(PoseRel(resampled.theta)).phi
    violations = validate_joint_limits(PoseRel(resampled.theta), model)
    if violations:
        logger.warning("reference gait leaves the joint limits: %s", ", ".join(map(str, violations)))
    return _trajectory_from_angles(t, phi, model, task.time_step)


def synthetic_reference_gait(task, model, knots=17, knee_lift=0.9, hip_lift=0.3):
    """
    Joint space stand-in for a recorded human swing. The relative angles blend from the start
    pose to the landing pose with a cosine ramp, and the swing hip and knee flex by a half sine
    bump to clear the ground. Start and landing poses come from the inverse kinematics at the task
    endpoints with r2_0, phi3_0 and the ankle profile.

    Args:
        task: GaitTask
        model: BodyModel
        knots: number of samples over the step
        knee_lift: peak extra swing knee flexion in rad
        hip_lift: peak extra swing hip flexion in rad

    Returns:
        ReferenceGait
    """
    ends = np.array([0.0, task.step_time])
    phi1 = ankle_profile_eval(task.ankle_profile, ends)
    phi = inverse_kinematics(model, IkInput(np.stack([task.start, task.land]), phi1,
                                            np.full(2, task.phi3_0), np.full(2, task.r2_0)))
    theta_start, theta_land = to_relative(PoseAbs(phi)).theta
    angle = np.pi * np.arange(knots) / (knots - 1)
    ramp = (1 - np.cos(angle)) / 2
    bump = np.sin(angle)
    lift = np.array([0.0, 0.0, 0.0, hip_lift, -knee_lift])
    theta = theta_start + np.outer(ramp, theta_land - theta_start) + np.outer(bump, lift)
    t = np.linspace(0.0, task.step_time, knots)
    return ReferenceGait(t, theta, provenance=f"synthetic reference for {task.name}")
