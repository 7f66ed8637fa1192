"""
Joint torques of the 5-link chain from the closed-form Lagrangian solution, plus a finite difference
Euler-Lagrange oracle built only on the mechanical energy of the chain.
"""
import logging
from dataclasses import dataclass

import numpy as np
from tqdm import tqdm

from .model import NUM_LINKS, ANGLE_MATRIX, ANGLE_MATRIX_INV, PoseAbs

logger = logging.getLogger(__name__)

# a_i: the torso does not carry the swing leg, which hangs from the hip
LENGTH_FLAGS = np.array([1.0, 1.0, 0.0, 1.0, 1.0])
ORACLE_STEP = 1e-6


@dataclass(frozen=True)
class CouplingCoefficients:
    """
    Attributes:
        p: (5, 5) symmetric inertia coupling matrix in kg m^2
        gvec: (5,) gravity coefficients g_i in N m
        a: (5,) length propagation flags
    """
    p: np.ndarray
    gvec: np.ndarray
    a: np.ndarray


@dataclass(frozen=True)
class TorqueVector:
    """
    Attributes:
        values: array of shape (..., 5) in N m
        frame: "absolute" or "relative"
    """
    values: np.ndarray
    frame: str

    def __post_init__(self):
        if self.frame not in ("absolute", "relative"):
            raise ValueError(f"unknown torque frame {self.frame}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("torque contains non-finite entries")


def coupling_coefficients(model):
    """
    Inertia coupling p_ij and gravity coefficients g_i of the chain. The mass sum in p_ij covers the
    links beyond the later of the two links, which reduces to links beyond i on the diagonal.

    Args:
        model: BodyModel

    Returns:
        CouplingCoefficients
    """
    lengths = model.lengths
    offsets = model.com_offsets
    masses = model.masses
    inertias = model.inertias
    a = LENGTH_FLAGS.copy()
    # tail[i] = sum of masses of links after link i
    tail = np.concatenate([np.cumsum(masses[::-1])[::-1][1:], [0.0]])
    p = np.zeros((NUM_LINKS, NUM_LINKS))
    for i in range(NUM_LINKS):
        p[i, i] = inertias[i] + masses[i] * offsets[i] ** 2 + a[i] * lengths[i] ** 2 * tail[i]
        for j in range(i + 1, NUM_LINKS):
            p[i, j] = (a[i] * masses[j] * offsets[j] * lengths[i]
                       + a[i] * a[j] * lengths[i] * lengths[j] * tail[j])
            p[j, i] = p[i, j]
    gvec = (masses * offsets + a * lengths * tail) * model.gravity
    return CouplingCoefficients(p=p, gvec=gvec, a=a)


def mass_matrix(coefficients, phi):
    """
    D(Phi) with D_ij = p_ij cos(phi_i - phi_j), shape (..., 5, 5).
    """
    phi = np.asarray(phi, dtype=float)
    return coefficients.p * np.cos(phi[..., :, None] - phi[..., None, :])


def gravity_torque(coefficients, phi):
    """
    G(Phi) with G_i = -g_i sin(phi_i), shape (..., 5).
    """
    return -coefficients.gvec * np.sin(np.asarray(phi, dtype=float))


def torque_absolute(model, pose, coefficients=None):
    """
    Net torque of each link in absolute angles, T = D(Phi) Phi'' + H(Phi, Phi') Phi' + G(Phi).
    Works on single poses and on stacked trajectories.

    Args:
        model: BodyModel
        pose: PoseAbs, arrays of shape (..., 5)
        coefficients: precomputed CouplingCoefficients for repeated calls

    Returns:
        TorqueVector in the absolute frame
    """
    if coefficients is None:
        coefficients = coupling_coefficients(model)
    diff = pose.phi[..., :, None] - pose.phi[..., None, :]
    inertial = np.einsum("...ij,...j->...i", coefficients.p * np.cos(diff), pose.ddphi)
    # H_ij = p_ij sin(phi_i - phi_j) phi'_j, applied to Phi'
    centripetal = np.einsum("...ij,...j->...i", coefficients.p * np.sin(diff), pose.dphi ** 2)
    return TorqueVector(inertial + centripetal + gravity_torque(coefficients, pose.phi), "absolute")


def torque_relative(model, pose, coefficients=None):
    """
    Joint torques T_Theta = A^T T_Phi. Component 0 is the stance-ankle torque.

    Args:
        model: BodyModel
        pose: PoseAbs
        coefficients: optional precomputed CouplingCoefficients

    Returns:
        TorqueVector in the relative frame
    """
    absolute = torque_absolute(model, pose, coefficients=coefficients)
    return TorqueVector(absolute.values @ ANGLE_MATRIX, "relative")


def com_positions(model, phi):
    """
    Center of mass of each link, shape (..., 5, 2). The anchor of link i+1 is the anchor of link i
    moved by a_i l_i along link i.
    """
    phi = np.asarray(phi, dtype=float)
    direction = np.stack([np.sin(phi), np.cos(phi)], axis=-1)
    steps = (LENGTH_FLAGS * model.lengths)[:, None] * direction
    anchors = np.cumsum(steps, axis=-2) - steps
    return anchors + model.com_offsets[:, None] * direction


def mechanical_energy(model, phi, dphi):
    """
    Kinetic and potential energy of the chain.

    Args:
        model: BodyModel
        phi: absolute angles (..., 5)
        dphi: absolute angular velocities (..., 5)

    Returns:
        kinetic, potential in J, each of shape (...)
    """
    phi = np.asarray(phi, dtype=float)
    dphi = np.asarray(dphi, dtype=float)
    velocity_direction = np.stack([np.cos(phi), -np.sin(phi)], axis=-1) * dphi[..., None]
    steps = (LENGTH_FLAGS * model.lengths)[:, None] * velocity_direction
    anchor_velocity = np.cumsum(steps, axis=-2) - steps
    com_velocity = anchor_velocity + model.com_offsets[:, None] * velocity_direction
    kinetic = 0.5 * np.sum(model.masses * np.sum(com_velocity ** 2, axis=-1)
                           + model.inertias * dphi ** 2, axis=-1)
    potential = model.gravity * np.sum(model.masses * com_positions(model, phi)[..., 1], axis=-1)
    return kinetic, potential


def lagrangian(model, phi, dphi):
    kinetic, potential = mechanical_energy(model, phi, dphi)
    return kinetic - potential


def _velocity_hessian(model, phi, h):
    """
    d^2 L / d phi' d phi' at phi by a central second order stencil around zero velocity, where
    the kinetic energy is an exact quadratic form. phi has shape (m, 5); returns (m, 5, 5).
    """
    eye = np.eye(NUM_LINKS)
    signs = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
    # offsets[i, j, s] = h * (s0 e_i + s1 e_j)
    offsets = h * (signs[None, None, :, 0, None] * eye[:, None, None, :]
                   + signs[None, None, :, 1, None] * eye[None, :, None, :])
    weights = np.array([1.0, -1.0, -1.0, 1.0])
    phi_grid = np.broadcast_to(phi[:, None, None, None, :], phi.shape[:1] + offsets.shape)
    kinetic, _ = mechanical_energy(model, phi_grid, np.broadcast_to(offsets, phi_grid.shape))
    return np.sum(kinetic * weights, axis=-1) / (4 * h ** 2)


def lagrangian_oracle(model, pose, step=ORACLE_STEP):
    """
    Torque from the Euler-Lagrange equation with every partial derivative of L = K - P taken by
    central finite differences of mechanical_energy. Independent of the closed-form coefficients.

    T_i = sum_j d2L/(dphi'_i dphi_j) phi'_j + sum_j d2L/(dphi'_i dphi'_j) phi''_j - dL/dphi_i

    Args:
        model: BodyModel
        pose: PoseAbs for a single state (arrays of shape (5,))
        step: finite difference step h in rad or rad/s

    Returns:
        TorqueVector in the absolute frame
    """
    phi, dphi, ddphi = pose.phi, pose.dphi, pose.ddphi
    if phi.shape != (NUM_LINKS,):
        raise ValueError("lagrangian_oracle evaluates one state at a time")
    h = step
    # velocity Hessian at phi and at phi shifted along the motion direction
    stations = np.stack([phi, phi + h * dphi, phi - h * dphi])
    hessians = _velocity_hessian(model, stations, h)
    momentum_rate = (hessians[1] - hessians[2]) @ dphi / (2 * h) + hessians[0] @ ddphi
    eye = np.eye(NUM_LINKS)
    shifted = np.concatenate([phi + h * eye, phi - h * eye])
    values = lagrangian(model, shifted, np.broadcast_to(dphi, shifted.shape))
    angle_gradient = (values[:NUM_LINKS] - values[NUM_LINKS:]) / (2 * h)
    return TorqueVector(momentum_rate - angle_gradient, "absolute")


def potential_gradient(model, phi, step=ORACLE_STEP):
    """
    Central difference gradient of the potential energy with respect to the absolute angles.
    """
    phi = np.asarray(phi, dtype=float)
    eye = np.eye(NUM_LINKS)
    shifted = np.concatenate([phi + step * eye, phi - step * eye])
    _, potential = mechanical_energy(model, shifted, np.zeros_like(shifted))
    return (potential[:NUM_LINKS] - potential[NUM_LINKS:]) / (2 * step)


def random_states(rs, count, angle_range=np.pi, max_rate=5.0, max_accel=20.0):
    """
    Draw uniformly distributed states for verification sweeps.

    Args:
        rs: numpy Generator
        count: number of states

    Returns:
        phi, dphi, ddphi arrays of shape (count, 5)
    """
    phi = rs.uniform(-angle_range, angle_range, size=(count, NUM_LINKS))
    dphi = rs.uniform(-max_rate, max_rate, size=(count, NUM_LINKS))
    ddphi = rs.uniform(-max_accel, max_accel, size=(count, NUM_LINKS))
    return phi, dphi, ddphi


def check_dynamics(model, trials=1000, seed=0, rtol=1e-4, atol=1e-6, progress=False):
    """
    Compare the closed-form torques against the energy-based oracle on random states and check
    the gravity gradient and coordinate identities.

    Args:
        model: BodyModel
        trials: number of random states
        seed: random seed
        rtol: relative tolerance of the oracle comparison
        atol: absolute floor in N m
        progress: show a tqdm progress bar

    Returns:
        dict with the worst error of each check and a pass flag
    """
    rs = np.random.default_rng(seed)
    coefficients = coupling_coefficients(model)
    phi, dphi, ddphi = random_states(rs, trials)
    closed = torque_absolute(model, PoseAbs(phi, dphi, ddphi), coefficients=coefficients).values
    relative = torque_relative(model, PoseAbs(phi, dphi, ddphi), coefficients=coefficients).values
    oracle = np.zeros_like(closed)
    gravity_error = np.zeros(trials)
    for t in tqdm(range(trials), disable=not progress):
        oracle[t] = lagrangian_oracle(model, PoseAbs(phi[t], dphi[t], ddphi[t])).values
        gravity_error[t] = np.max(np.abs(gravity_torque(coefficients, phi[t])
                                         - potential_gradient(model, phi[t])))
    excess = np.abs(closed - oracle) - (rtol * np.abs(closed) + atol)
    relative_error = np.abs(closed - oracle) / np.maximum(np.abs(closed), atol / rtol)
    dtheta = dphi @ ANGLE_MATRIX_INV.T
    power_error = np.abs(np.sum(relative * dtheta, axis=-1) - np.sum(closed * dphi, axis=-1))
    identity_error = np.abs(relative - closed @ ANGLE_MATRIX)
    results = {"trials": trials,
               "seed": seed,
               "max_oracle_relative_error": float(relative_error.max()),
               "oracle_failures": int(np.count_nonzero(np.any(excess > 0, axis=-1))),
               "max_gravity_gradient_error": float(gravity_error.max()),
               "max_coordinate_identity_error": float(identity_error.max()),
               "max_power_identity_error": float(power_error.max())}
    results["passed"] = results["oracle_failures"] == 0 and results["max_gravity_gradient_error"] <= 1e-6
    logger.info("check_dynamics: %s", results)
    return results
