"""Static stiffness of one arm and of the coupled two-arm system.

The arms are treated as rigid links with linear torsional springs in the
joints; the coupling module between the flanges is a six-dimensional
linear spring. The tool sits rigidly on the arm-1 side of the module, so
the tool-point stiffness is arm 1 in parallel with the series combination
of the spring and arm 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ClosureError, InvalidInputError, SingularConfigurationError
from .geometry import Pose, rotate6, transport_compliance, transport_stiffness
from .kinematics import ArmModel, forward_kinematics, jacobian

CLOSURE_TOL = 1e-4
_MIN_SINGULAR_VALUE = 1e-8

_AXES = ("x", "y", "z", "rx", "ry", "rz")


@dataclass(frozen=True)
class JointStiffness:
    """Diagonal joint stiffness, N·m/rad per joint."""

    diag: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=float)
        if d.shape != (6,) or not np.all(np.isfinite(d)):
            raise InvalidInputError("joint stiffness must be 6 finite values")
        if np.any(d <= 0):
            raise InvalidInputError("joint stiffness entries must be positive")
        object.__setattr__(self, "diag", d)


@dataclass(frozen=True)
class SpringModel:
    """6x6 stiffness of the coupling module, expressed in its attachment
    frame: translations N/m, rotations N·m/rad, coupling blocks N."""

    K: np.ndarray

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        if K.shape != (6, 6) or not np.all(np.isfinite(K)):
            raise InvalidInputError("spring matrix must be a finite 6x6 array")
        scale = np.max(np.abs(K))
        if scale == 0 or np.max(np.abs(K - K.T)) > 1e-9 * scale:
            raise InvalidInputError("spring matrix must be symmetric (1e-9 relative)")
        if np.min(scipy.linalg.eigvalsh(K)) <= 0:
            raise InvalidInputError("spring matrix must be positive definite")
        object.__setattr__(self, "K", 0.5 * (K + K.T))


@dataclass(frozen=True)
class Wrench:
    """Force (N) and torque (N·m) in the world frame."""

    force: np.ndarray
    torque: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        f = np.asarray(self.force, dtype=float)
        t = np.asarray(self.torque, dtype=float)
        if f.shape != (3,) or t.shape != (3,) or not (np.all(np.isfinite(f)) and np.all(np.isfinite(t))):
            raise InvalidInputError("wrench force/torque must be finite 3-vectors")
        object.__setattr__(self, "force", f)
        object.__setattr__(self, "torque", t)

    @staticmethod
    def zero():
        return Wrench(np.zeros(3), np.zeros(3))

    @staticmethod
    def from_vector(v):
        v = np.asarray(v, dtype=float)
        return Wrench(v[:3], v[3:])

    def as_vector(self):
        return np.concatenate([self.force, self.torque])


@dataclass(frozen=True)
class CoupledSystem:
    """Both arms, their joint springs, the coupling-module spring and the
    module geometry (tool point and arm-2 attachment, both relative to the
    arm-1 flange)."""

    arm1: ArmModel
    arm2: ArmModel
    joint_stiffness1: JointStiffness
    joint_stiffness2: JointStiffness
    spring: SpringModel
    tool_offset: Pose = field(default_factory=Pose.identity)
    flange2_offset: Pose = field(default_factory=Pose.identity)

    def __post_init__(self):
        if np.array_equal(self.arm1.base_pose.position, self.arm2.base_pose.position) and np.array_equal(
            self.arm1.base_pose.quaternion, self.arm2.base_pose.quaternion
        ):
            raise InvalidInputError("the two arm base poses must be distinct")


def _spd_inverse(M, what):
    try:
        c, low = scipy.linalg.cho_factor(M)
    except scipy.linalg.LinAlgError as exc:
        raise SingularConfigurationError(f"{what} is not positive definite: {exc}") from exc
    return scipy.linalg.cho_solve((c, low), np.eye(M.shape[0]))


def stiffness_from_jacobian(J, k_diag):
    """Cartesian stiffness (J K_joint^-1 J^T)^-1 for a square Jacobian."""
    J = np.asarray(J, dtype=float)
    k = np.asarray(k_diag, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1] or k.shape != (J.shape[1],):
        raise InvalidInputError("Jacobian must be square with matching joint stiffness length")
    sv = np.linalg.svd(J, compute_uv=False)
    if sv[-1] <= _MIN_SINGULAR_VALUE:
        u, _, _ = np.linalg.svd(J)
        dir6 = u[:, -1]
        axis = _AXES[int(np.argmax(np.abs(dir6[: len(_AXES)])))] if len(dir6) >= 6 else "n/a"
        raise SingularConfigurationError(
            f"Jacobian is rank deficient (smallest singular value {sv[-1]:.3e}); "
            f"deficient direction dominated by axis '{axis}'"
        )
    C = J @ np.diag(1.0 / k) @ J.T
    K = _spd_inverse(C, "Cartesian compliance")
    return 0.5 * (K + K.T)


def cartesian_stiffness(arm: ArmModel, q, k_joint: JointStiffness, allow_out_of_limits=False):
    """Configuration-dependent 6x6 Cartesian stiffness at the flange,
    world frame."""
    J = jacobian(arm, q, allow_out_of_limits=allow_out_of_limits)
    return stiffness_from_jacobian(J, k_joint.diag)


def _branch_frames(sys: CoupledSystem, q1, q2, allow_out_of_limits=False, closure_tol=CLOSURE_TOL):
    fk1 = forward_kinematics(sys.arm1, q1, allow_out_of_limits=allow_out_of_limits)
    fk2 = forward_kinematics(sys.arm2, q2, allow_out_of_limits=allow_out_of_limits)
    attach = fk1 @ sys.flange2_offset
    gap = float(np.linalg.norm(fk2.position - attach.position))
    if gap > closure_tol:
        raise ClosureError(
            f"kinematic closure violated: arm-2 flange is {gap:.3e} m from its attachment frame",
            gap=gap,
        )
    tool = fk1 @ sys.tool_offset
    return fk1, fk2, attach, tool


def _spring_compliance_world(sys: CoupledSystem, attach: Pose):
    Ks_world = rotate6(attach.rotation())
    Ks_world = Ks_world @ sys.spring.K @ Ks_world.T
    return _spd_inverse(Ks_world, "coupling-module spring stiffness")


def _branch2_compliance(sys: CoupledSystem, q2, fk2: Pose, attach: Pose, allow_out_of_limits=False):
    """Series compliance of arm 2 and the spring, at the attachment point."""
    K2 = cartesian_stiffness(sys.arm2, q2, sys.joint_stiffness2, allow_out_of_limits=allow_out_of_limits)
    C2 = _spd_inverse(K2, "arm-2 Cartesian stiffness")
    C2 = transport_compliance(C2, attach.position - fk2.position)
    return C2 + _spring_compliance_world(sys, attach)


def coupled_stiffness(sys: CoupledSystem, q1, q2, allow_out_of_limits=False, closure_tol=CLOSURE_TOL):
    """6x6 stiffness of the closed chain at the tool point, world frame.

    closure_tol may be widened when evaluating commanded (tensioned)
    configurations, whose flange gap is the setpoint offset itself.
    """
    fk1, fk2, attach, tool = _branch_frames(sys, q1, q2, allow_out_of_limits, closure_tol)
    K1 = cartesian_stiffness(sys.arm1, q1, sys.joint_stiffness1, allow_out_of_limits=allow_out_of_limits)
    K1_tool = transport_stiffness(K1, tool.position - fk1.position)
    C_branch2 = _branch2_compliance(sys, q2, fk2, attach, allow_out_of_limits)
    C_branch2_tool = transport_compliance(C_branch2, tool.position - attach.position)
    K = K1_tool + _spd_inverse(C_branch2_tool, "arm-2 branch compliance")
    return 0.5 * (K + K.T)


def branch_compliance(sys: CoupledSystem, q1, q2, allow_out_of_limits=False):
    """Series compliance of the arm-2 branch (arm 2 + spring) as seen from
    arm 2's flange attachment, world frame."""
    _, fk2, attach, _ = _branch_frames(sys, q1, q2, allow_out_of_limits)
    C = _branch2_compliance(sys, q2, fk2, attach, allow_out_of_limits)
    return 0.5 * (C + C.T)


def tension_offset(sys: CoupledSystem, q1, q2, desired: Wrench, allow_out_of_limits=False):
    """Setpoint offset for robot 2 (3 translations m, 3 rotations rad,
    world axes) that makes the coupling module carry `desired`."""
    C = branch_compliance(sys, q1, q2, allow_out_of_limits)
    return C @ desired.as_vector()


def predicted_tension(sys: CoupledSystem, q1, q2, offset, allow_out_of_limits=False) -> Wrench:
    """Internal wrench produced by commanding robot 2 to nominal ⊕ offset;
    exact inverse of tension_offset in the linear model."""
    offset = np.asarray(offset, dtype=float)
    if offset.shape != (6,) or not np.all(np.isfinite(offset)):
        raise InvalidInputError("offset must be a finite 6-vector")
    C = branch_compliance(sys, q1, q2, allow_out_of_limits)
    K = _spd_inverse(C, "arm-2 branch compliance")
    return Wrench.from_vector(K @ offset)
