"""
Physical parameters of the planar 5-link exoskeleton and the map between relative (motor) and
absolute (dynamics) joint angles.

Link order: 1 = stance shank, 2 = stance thigh, 3 = torso, 4 = swing thigh, 5 = swing shank.
Absolute angles phi are measured clockwise from vertical up. Relative angles theta are measured
between link i and link i-1 (ground for link 1), positive anti-clockwise. Units are SI throughout.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

NUM_LINKS = 5
DEFAULT_GRAVITY = 9.81
LIMIT_TOLERANCE = 1e-9

# Phi = A @ Theta + b
ANGLE_MATRIX = -np.tril(np.ones((NUM_LINKS, NUM_LINKS)))
ANGLE_OFFSET = np.array([np.pi / 2, np.pi / 2, np.pi / 2, 3 * np.pi / 2, 3 * np.pi / 2])
ANGLE_MATRIX_INV = np.linalg.inv(ANGLE_MATRIX)

# Human joint range in degrees: (flexion or dorsiflexion limit, extension or plantarflexion limit)
DEFAULT_JOINT_LIMITS_DEG = {"hip": (100.0, 80.0),
                            "knee": (100.0, 0.0),
                            "ankle": (20.0, 0.0)}

# Anatomical flexion angle of each joint as sign * theta_i + offset. The stance hip shares theta3
# with the torso, the swing hip is theta4 measured from the torso.
ANATOMICAL_MAP = (("stance_ankle", "ankle", 0, -1.0, np.pi / 2),
                  ("stance_knee", "knee", 1, 1.0, 0.0),
                  ("stance_hip", "hip", 2, -1.0, 0.0),
                  ("swing_hip", "hip", 3, 1.0, 0.0),
                  ("swing_knee", "knee", 4, -1.0, 0.0))


class JointLimitError(ValueError):
    """
    Raised when a pose leaves the human joint range.

    Attributes:
        violations: list of JointViolation entries describing each offending joint.
    """
    def __init__(self, violations, message=None):
        self.violations = list(violations)
        if message is None:
            message = "joint limits violated: " + ", ".join(str(v) for v in self.violations)
        super().__init__(message)


@dataclass(frozen=True)
class LinkParams:
    """
    Geometry and inertia of one rigid link.

    Attributes:
        length: link length l_i in m
        com_offset: distance d_i from joint i to the link center of mass in m
        mass: m_i in kg
        inertia: I_i about the center of mass in kg m^2
    """
    length: float
    com_offset: float
    mass: float
    inertia: float

    def __post_init__(self):
        values = np.array([self.length, self.com_offset, self.mass, self.inertia], dtype=float)
        if not np.all(np.isfinite(values)):
            raise ValueError(f"link parameters must be finite, got {values}")
        if self.length <= 0:
            raise ValueError(f"link length must be positive, got {self.length}")
        if self.mass < 0:
            raise ValueError(f"link mass must be non-negative, got {self.mass}")
        if self.inertia < 0:
            raise ValueError(f"link inertia must be non-negative, got {self.inertia}")
        if not 0 <= self.com_offset <= self.length:
            raise ValueError(f"com offset {self.com_offset} outside [0, {self.length}]")


@dataclass(frozen=True)
class BodyModel:
    """
    Five links plus joint limits and gravity.

    Attributes:
        links: tuple of 5 LinkParams in link order
        joint_limits: dict joint name -> (lower, upper) anatomical angle in radians, where the
            anatomical angle is flexion for hip/knee and dorsiflexion for the ankle
        gravity: m/s^2
    """
    links: tuple
    joint_limits: dict = field(default_factory=lambda: limits_from_degrees(DEFAULT_JOINT_LIMITS_DEG))
    gravity: float = DEFAULT_GRAVITY

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        if len(self.links) != NUM_LINKS:
            raise ValueError(f"BodyModel needs exactly {NUM_LINKS} links, got {len(self.links)}")
        for joint in ("hip", "knee", "ankle"):
            if joint not in self.joint_limits:
                raise ValueError(f"joint limits missing entry for {joint}")
            lower, upper = self.joint_limits[joint]
            if not lower <= upper:
                raise ValueError(f"empty joint limit interval for {joint}: ({lower}, {upper})")
        if not self.gravity > 0:
            raise ValueError(f"gravity must be positive, got {self.gravity}")

    @property
    def lengths(self):
        return np.array([link.length for link in self.links])

    @property
    def com_offsets(self):
        return np.array([link.com_offset for link in self.links])

    @property
    def masses(self):
        return np.array([link.mass for link in self.links])

    @property
    def inertias(self):
        return np.array([link.inertia for link in self.links])


def build_body_model(lengths, com_offsets, masses, inertias, joint_limits_deg=None,
                     gravity=DEFAULT_GRAVITY):
    """
    Assemble a BodyModel from per-link parameter arrays ordered from stance shank to swing shank.

    Args:
        lengths: link lengths in m
        com_offsets: center of mass offsets in m
        masses: link masses in kg
        inertias: link inertias in kg m^2
        joint_limits_deg: optional dict joint -> (flexion, extension) in degrees
        gravity: m/s^2

    Returns:
        BodyModel
    """
    columns = [np.asarray(c, dtype=float).ravel() for c in (lengths, com_offsets, masses, inertias)]
    if any(c.size != NUM_LINKS for c in columns):
        raise ValueError(f"each link parameter needs {NUM_LINKS} values")
    links = tuple(LinkParams(*map(float, row)) for row in zip(*columns))
    if joint_limits_deg is None:
        joint_limits_deg = DEFAULT_JOINT_LIMITS_DEG
    return BodyModel(links=links, joint_limits=limits_from_degrees(joint_limits_deg), gravity=gravity)


def limits_from_degrees(limits_deg):
    """
    Convert (flexion, extension) limits in degrees to (lower, upper) intervals of
    the anatomical angle in radians.
    """
    return {joint: (-np.radians(ext), np.radians(flex)) for joint, (flex, ext) in limits_deg.items()}


@dataclass(frozen=True)
class PoseAbs:
    """
    Absolute link angles with their first and second time derivatives. Arrays have shape (..., 5).
    """
    phi: np.ndarray
    dphi: np.ndarray = None
    ddphi: np.ndarray = None

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        object.__setattr__(self, "phi", phi)
        for name in ("dphi", "ddphi"):
            value = getattr(self, name)
            value = np.zeros_like(phi) if value is None else np.asarray(value, dtype=float)
            object.__setattr__(self, name, value)
        _check_pose_arrays(self.phi, self.dphi, self.ddphi)


@dataclass(frozen=True)
class PoseRel:
    """
    Relative joint angles with their first and second time derivatives. Arrays have shape (..., 5).
    """
    theta: np.ndarray
    dtheta: np.ndarray = None
    ddtheta: np.ndarray = None

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        object.__setattr__(self, "theta", theta)
        for name in ("dtheta", "ddtheta"):
            value = getattr(self, name)
            value = np.zeros_like(theta) if value is None else np.asarray(value, dtype=float)
            object.__setattr__(self, name, value)
        _check_pose_arrays(self.theta, self.dtheta, self.ddtheta)


def _check_pose_arrays(*arrays):
    for array in arrays:
        if array.shape[-1:] != (NUM_LINKS,) or array.shape != arrays[0].shape:
            raise ValueError(f"pose arrays must share shape (..., {NUM_LINKS}), got {array.shape}")
        if not np.all(np.isfinite(array)):
            raise ValueError("pose contains non-finite entries")


@dataclass(frozen=True)
class AngleTransform:
    """
    Affine map Phi = A Theta + b between relative and absolute angles.
    """
    A: np.ndarray = field(default_factory=lambda: ANGLE_MATRIX.copy())
    b: np.ndarray = field(default_factory=lambda: ANGLE_OFFSET.copy())

    @property
    def A_inv(self):
        return np.linalg.inv(self.A)


@dataclass(frozen=True)
class JointViolation:
    joint: str
    angle: float
    lower: float
    upper: float

    def __str__(self):
        return (f"{self.joint} at {np.degrees(self.angle):.2f} deg outside "
                f"[{np.degrees(self.lower):.1f}, {np.degrees(self.upper):.1f}] deg")


def to_absolute(theta_pose):
    """
    Map a relative-angle pose to absolute angles. The offset b only enters the angles; velocities
    and accelerations map through A alone.

    Args:
        theta_pose: PoseRel

    Returns:
        PoseAbs
    """
    return PoseAbs(phi=theta_pose.theta @ ANGLE_MATRIX.T + ANGLE_OFFSET,
                   dphi=theta_pose.dtheta @ ANGLE_MATRIX.T,
                   ddphi=theta_pose.ddtheta @ ANGLE_MATRIX.T)


def to_relative(phi_pose):
    """
    Map an absolute-angle pose back to the relative angles used for motor position control.

    Args:
        phi_pose: PoseAbs

    Returns:
        PoseRel
    """
    return PoseRel(theta=(phi_pose.phi - ANGLE_OFFSET) @ ANGLE_MATRIX_INV.T,
                   dtheta=phi_pose.dphi @ ANGLE_MATRIX_INV.T,
                   ddtheta=phi_pose.ddphi @ ANGLE_MATRIX_INV.T)


def anatomical_angles(theta):
    """
    Anatomical flexion (dorsiflexion for the ankle) of each joint for relative angles theta,
    wrapped to [-pi, pi).

    Args:
        theta: array of shape (..., 5)

    Returns:
        dict joint label -> array of shape (...)
    """
    theta = np.asarray(theta, dtype=float)
    angles = {}
    for label, _, index, sign, offset in ANATOMICAL_MAP:
        angles[label] = _wrap(sign * theta[..., index] + offset)
    return angles


def validate_joint_limits(theta_pose, model, tol=LIMIT_TOLERANCE):
    """
    List every joint whose anatomical angle leaves its allowed interval. An empty list means the
    pose is within the human joint range. For a trajectory (leading dimensions), the worst sample
    of each joint is reported.

    Args:
        theta_pose: PoseRel
        model: BodyModel supplying the limits
        tol: slack in radians applied to both interval ends

    Returns:
        list of JointViolation
    """
    violations = []
    angles = anatomical_angles(theta_pose.theta)
    for label, joint, _, _, _ in ANATOMICAL_MAP:
        lower, upper = model.joint_limits[joint]
        angle = np.atleast_1d(angles[label]).ravel()
        excess = np.maximum(lower - angle, angle - upper)
        worst = int(np.argmax(excess))
        if excess[worst] > tol:
            violations.append(JointViolation(label, float(angle[worst]), lower, upper))
    return violations


def joint_limit_mask(theta, model, tol=LIMIT_TOLERANCE):
    """
    Boolean array of shape (...) marking samples with at least one joint outside its limits.
    """
    angles = anatomical_angles(theta)
    mask = np.zeros(np.shape(theta)[:-1], dtype=bool)
    for label, joint, _, _, _ in ANATOMICAL_MAP:
        lower, upper = model.joint_limits[joint]
        mask |= (angles[label] < lower - tol) | (angles[label] > upper + tol)
    return mask


def _wrap(angle):
    return (angle + np.pi) % (2 * np.pi) - np.pi
