"""
Forward kinematics of the 5-link chain and the closed-form inverse kinematics that recovers all
absolute angles from the swing foot position (x5, y5), the stance ankle angle phi1, the torso
angle phi3 and the stance thigh ratio r2.

Every function accepts scalars or arrays with matching leading dimensions, so a full sampled gait
is solved in one call.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .model import PoseAbs, JointLimitError, to_relative, validate_joint_limits

logger = logging.getLogger(__name__)

# slack on circle intersection discriminants
REACH_TOLERANCE = 1e-12
STANCE_THIGH_SWEEP = np.pi / 4


class ReachabilityError(ValueError):
    """
    Raised when the chain cannot reach a requested point.

    Attributes:
        index: flat index of the first failing sample, or None for scalar input
    """
    def __init__(self, message, index=None):
        self.index = index
        if index is not None:
            message = f"{message} (sample {index})"
        super().__init__(message)


@dataclass(frozen=True)
class JointPositions:
    """
    Joint positions in the sagittal plane, each of shape (..., 2). p0 is the stance ankle at the
    origin and p_i is the far end of link i. The swing thigh hangs from p2.
    """
    p0: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    p3: np.ndarray
    p4: np.ndarray
    p5: np.ndarray

    def as_array(self):
        return np.stack([self.p0, self.p1, self.p2, self.p3, self.p4, self.p5], axis=-2)


@dataclass(frozen=True)
class IkInput:
    """
    Gait description of one or more samples.

    Attributes:
        target: swing foot (x5, y5) in m, shape (..., 2)
        phi1: stance shank absolute angle in rad
        phi3: torso absolute angle in rad
        r2: position of phi2 inside its feasible range, 0 = minimum and 1 = maximum
    """
    target: np.ndarray
    phi1: np.ndarray
    phi3: np.ndarray
    r2: np.ndarray

    def __post_init__(self):
        for name in ("target", "phi1", "phi3", "r2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.target.shape[-1:] != (2,):
            raise ValueError(f"target must have shape (..., 2), got {self.target.shape}")
        if np.any(self.r2 < 0) or np.any(self.r2 > 1):
            raise ValueError("r2 must lie in [0, 1]")


def _unit(angle):
    return np.stack([np.sin(angle), np.cos(angle)], axis=-1)


def _first_index(mask):
    mask = np.asarray(mask)
    if mask.ndim == 0:
        return None
    return int(np.flatnonzero(mask)[0])


def forward_kinematics(model, phi):
    """
    Joint positions for absolute angles phi.

    Args:
        model: BodyModel
        phi: array (..., 5)

    Returns:
        JointPositions
    """
    phi = np.asarray(phi, dtype=float)
    l1, l2, l3, l4, l5 = model.lengths
    p0 = np.zeros(phi.shape[:-1] + (2,))
    p1 = l1 * _unit(phi[..., 0])
    p2 = p1 + l2 * _unit(phi[..., 1])
    p3 = p2 + l3 * _unit(phi[..., 2])
    p4 = p2 + l4 * _unit(phi[..., 3])
    p5 = p4 + l5 * _unit(phi[..., 4])
    return JointPositions(p0, p1, p2, p3, p4, p5)


def segment_angle(p_from, p_to):
    """
    Absolute angle of the segment p_from -> p_to, clockwise from vertical up, in [-pi/2, 3pi/2).

    Raises:
        ReachabilityError: the two points coincide
    """
    delta = np.asarray(p_to, dtype=float) - np.asarray(p_from, dtype=float)
    degenerate = np.hypot(delta[..., 0], delta[..., 1]) == 0
    if np.any(degenerate):
        raise ReachabilityError("zero-length segment", _first_index(degenerate))
    return np.pi / 2 - np.arctan2(delta[..., 1], delta[..., 0])


def _rotate(c, s, vector):
    """[[c, -s], [s, c]] @ vector over the last axis."""
    return np.stack([c * vector[..., 0] - s * vector[..., 1],
                     s * vector[..., 0] + c * vector[..., 1]], axis=-1)


def phi2_range(model, phi1, target):
    """
    Interval of stance thigh angles phi2 from which the swing leg can still reach the target.
    The circle of radius l2 around p1 is intersected with the circle of radius l4 + l5 around the
    target; the intersection angle bounds phi2 on the side the foot is heading, clamped to
    [phi1 - pi/4, phi1]. When the target is so close to p1 that the circles do not cross, the whole
    clamp interval is feasible.

    Args:
        model: BodyModel
        phi1: stance shank angle(s) in rad
        target: swing foot position(s), shape (..., 2)

    Returns:
        phi2_min, phi2_max arrays with the broadcast shape of phi1 and target[..., 0]
    """
    phi1 = np.asarray(phi1, dtype=float)
    target = np.asarray(target, dtype=float)
    l1, l2, _, l4, l5 = model.lengths
    leg = l4 + l5
    x5 = target[..., 0]
    offset = target - l1 * _unit(phi1)
    dist = np.hypot(offset[..., 0], offset[..., 1])
    unreachable = dist > l2 + leg + REACH_TOLERANCE
    if np.any(unreachable):
        raise ReachabilityError("target unreachable", _first_index(unreachable))
    close = dist + l2 <= leg
    safe_dist = np.where(close | (dist == 0), 1.0, dist)
    b1 = (l2 ** 2 - leg ** 2 + dist ** 2) / (2 * safe_dist)
    disc = l2 ** 2 - b1 ** 2
    missing = ~close & (disc < -REACH_TOLERANCE)
    if np.any(missing):
        raise ReachabilityError("no circle intersection", _first_index(missing))
    b2 = np.sign(x5) * np.sqrt(np.clip(disc, 0.0, None))
    direction = offset / safe_dist[..., None]
    rotated = _rotate(b1, b2, direction)
    bound = np.pi / 2 - np.arctan2(rotated[..., 1], rotated[..., 0])
    bound = (bound - phi1 + np.pi) % (2 * np.pi) + phi1 - np.pi
    # the intersection bound is clamped into the human range [phi1 - pi/4, phi1]
    bound = np.clip(bound, phi1 - STANCE_THIGH_SWEEP, phi1)
    phi2_max = np.where(x5 >= 0, phi1, bound)
    phi2_min = np.where(x5 <= 0, phi1 - STANCE_THIGH_SWEEP, bound)
    phi2_max = np.where(close, phi1, phi2_max)
    phi2_min = np.where(close, phi1 - STANCE_THIGH_SWEEP, phi2_min)
    return phi2_min, phi2_max


def inverse_kinematics(model, ik_input, check_limits=True):
    """
    Absolute angles of all links for one or more gait samples. The swing knee takes the
    intersection on the anterior side of the hip-to-foot line.

    Args:
        model: BodyModel
        ik_input: IkInput
        check_limits: raise JointLimitError when the pose leaves the human joint range

    Returns:
        phi array (..., 5)

    Raises:
        ReachabilityError: target or swing leg out of reach
        JointLimitError: pose outside the joint limits
    """
    l1, l2, _, l4, l5 = model.lengths
    phi1 = ik_input.phi1
    target = ik_input.target
    phi2_min, phi2_max = phi2_range(model, phi1, target)
    r2 = ik_input.r2
    phi2 = r2 * phi2_max + (1 - r2) * phi2_min
    p2 = l1 * _unit(phi1) + l2 * _unit(phi2)
    offset = target - p2
    dist = np.hypot(offset[..., 0], offset[..., 1])
    too_far = (dist > l4 + l5 + REACH_TOLERANCE) | (dist < abs(l4 - l5) - REACH_TOLERANCE) | (dist == 0)
    if np.any(too_far):
        raise ReachabilityError("swing leg unreachable", _first_index(too_far))
    c1 = (l4 ** 2 - l5 ** 2 + dist ** 2) / (2 * dist)
    c2 = np.sqrt(np.clip(l4 ** 2 - c1 ** 2, 0.0, None))
    p4 = _rotate(c1, c2, offset / dist[..., None]) + p2
    phi4 = segment_angle(p2, p4)
    phi5 = segment_angle(p4, target)
    shape = np.broadcast_shapes(phi1.shape, ik_input.phi3.shape, phi2.shape)
    phi = np.stack([np.broadcast_to(a, shape) for a in (phi1, phi2, ik_input.phi3, phi4, phi5)], axis=-1)
    if check_limits:
        violations = validate_joint_limits(to_relative(PoseAbs(phi)), model)
        if violations:
            raise JointLimitError(violations)
    return phi


def solve_pose(model, x5, y5, phi1, phi3, r2, check_limits=True):
    """
    Scalar convenience wrapper around inverse_kinematics.

    Returns:
        phi array of shape (5,)
    """
    return inverse_kinematics(model, IkInput(np.array([x5, y5]), phi1, phi3, r2), check_limits=check_limits)
