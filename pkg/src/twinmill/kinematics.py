"""Serial 6-DOF arm: standard DH forward kinematics, geometric Jacobian
and damped least-squares inverse kinematics.

DH convention is standard Denavit-Hartenberg (RotZ(theta) TransZ(d)
TransX(a) RotX(alpha)); all joints revolute.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, UnreachableTargetError
from .geometry import Pose, pose_error

N_JOINTS = 6

DEFAULT_TOL_POS = 1e-6
DEFAULT_TOL_ROT = 1e-6
DEFAULT_MAX_ITER = 200
_LAMBDA0 = 1e-3


def _as_joint_vector(q):
    q = np.asarray(q, dtype=float)
    if q.shape != (N_JOINTS,):
        raise InvalidInputError(f"joint configuration must have {N_JOINTS} entries")
    if not np.all(np.isfinite(q)):
        raise InvalidInputError("joint configuration contains non-finite values")
    return q


@dataclass(frozen=True)
class ArmModel:
    """Standard-DH description of one serial arm.

    dh_rows: 6 rows of (a [m], alpha [rad], d [m], theta_offset [rad]).
    """

    dh_rows: np.ndarray
    joint_limits: np.ndarray
    base_pose: Pose = field(default_factory=Pose.identity)
    flange_offset: Pose = field(default_factory=Pose.identity)

    def __post_init__(self):
        rows = np.asarray(self.dh_rows, dtype=float)
        lims = np.asarray(self.joint_limits, dtype=float)
        if rows.shape != (N_JOINTS, 4) or not np.all(np.isfinite(rows)):
            raise InvalidInputError("dh_rows must be a finite 6x4 array (a, alpha, d, theta_offset)")
        if lims.shape != (N_JOINTS, 2) or not np.all(np.isfinite(lims)):
            raise InvalidInputError("joint_limits must be a finite 6x2 array")
        if np.any(lims[:, 0] >= lims[:, 1]):
            raise InvalidInputError("each joint limit must satisfy lo < hi")
        reach = np.sum(np.abs(rows[:, 0])) + np.sum(np.abs(rows[:, 2]))
        # Flange offset counts towards the physical extent so a chain of
        # zero-length links with a tool sticking out is still legal.
        extent = reach + np.linalg.norm(self.flange_offset.position)
        if not (extent > 0 and np.isfinite(extent)):
            raise InvalidInputError("arm reach (sum of |a| + |d|) must be positive and finite")
        object.__setattr__(self, "dh_rows", rows)
        object.__setattr__(self, "joint_limits", lims)

    @property
    def reach(self):
        return float(np.sum(np.abs(self.dh_rows[:, 0])) + np.sum(np.abs(self.dh_rows[:, 2])))

    def within_limits(self, q):
        q = _as_joint_vector(q)
        return bool(np.all(q >= self.joint_limits[:, 0]) and np.all(q <= self.joint_limits[:, 1]))

    def clamp(self, q):
        return np.clip(_as_joint_vector(q), self.joint_limits[:, 0], self.joint_limits[:, 1])


def _dh_matrix(a, alpha, d, theta):
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    return np.array(
        [
            [ct, -st * ca, st * sa, a * ct],
            [st, ct * ca, -ct * sa, a * st],
            [0.0, sa, ca, d],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def _check_limits(arm, q, allow_out_of_limits):
    q = _as_joint_vector(q)
    if not allow_out_of_limits and not arm.within_limits(q):
        raise InvalidInputError("joint configuration violates the arm's joint limits")
    return q


def _frames(arm: ArmModel, q):
    """World-frame 4x4 transforms after each joint, plus the flange frame."""
    T = arm.base_pose.matrix()
    frames = [T]
    for i in range(N_JOINTS):
        a, alpha, d, off = arm.dh_rows[i]
        T = T @ _dh_matrix(a, alpha, d, q[i] + off)
        frames.append(T)
    return frames, T @ arm.flange_offset.matrix()


def forward_kinematics(arm: ArmModel, q, allow_out_of_limits=False) -> Pose:
    """World-frame flange pose: base ∘ DH chain ∘ flange offset."""
    q = _check_limits(arm, q, allow_out_of_limits)
    _, T = _frames(arm, q)
    return Pose.from_matrix(T)


def jacobian(arm: ArmModel, q, allow_out_of_limits=False):
    """Geometric Jacobian at the flange, world frame.

    Rows 0-2 map joint rates to flange linear velocity, rows 3-5 to
    angular velocity.
    """
    q = _check_limits(arm, q, allow_out_of_limits)
    frames, flange = _frames(arm, q)
    p_f = flange[:3, 3]
    J = np.zeros((6, N_JOINTS))
    for i in range(N_JOINTS):
        z = frames[i][:3, 2]
        p = frames[i][:3, 3]
        J[:3, i] = np.cross(z, p_f - p)
        J[3:, i] = z
    return J


def inverse_kinematics(
    arm: ArmModel,
    target: Pose,
    seed,
    tol_pos=DEFAULT_TOL_POS,
    tol_rot=DEFAULT_TOL_ROT,
    max_iter=DEFAULT_MAX_ITER,
):
    """Damped least-squares IK on the 6-D pose error twist.

    Joint limits are enforced by clamping inside every iteration, so the
    returned configuration is always feasible. Deterministic: identical
    inputs give bit-identical outputs.
    """
    if tol_pos <= 0 or tol_rot <= 0:
        raise InvalidInputError("tolerances must be positive")
    if max_iter < 1:
        raise InvalidInputError("max_iter must be at least 1")
    seed = _as_joint_vector(seed)
    if not arm.within_limits(seed):
        raise InvalidInputError("IK seed violates joint limits")

    dist = np.linalg.norm(target.position - arm.base_pose.position)
    if dist > arm.reach + np.linalg.norm(arm.flange_offset.position):
        raise UnreachableTargetError(
            f"target {dist:.3f} m from base exceeds arm reach {arm.reach:.3f} m",
            pos_residual=dist - arm.reach,
        )

    q = seed.copy()
    lam = _LAMBDA0
    err = pose_error(forward_kinematics(arm, q, allow_out_of_limits=True), target)
    best = (np.linalg.norm(err[:3]), np.linalg.norm(err[3:]))
    for _ in range(max_iter):
        pos_res, rot_res = np.linalg.norm(err[:3]), np.linalg.norm(err[3:])
        if pos_res <= tol_pos and rot_res <= tol_rot:
            return q
        J = jacobian(arm, q, allow_out_of_limits=True)
        step_norm = np.linalg.norm(err)
        # Damped step; on residual increase back off with 10x damping.
        for _retry in range(8):
            dq = J.T @ np.linalg.solve(J @ J.T + lam**2 * np.eye(6), err)
            q_new = arm.clamp(q + dq)
            err_new = pose_error(forward_kinematics(arm, q_new, allow_out_of_limits=True), target)
            if np.linalg.norm(err_new) <= step_norm:
                lam = _LAMBDA0
                break
            lam *= 10.0
        q, err = q_new, err_new
        res = (np.linalg.norm(err[:3]), np.linalg.norm(err[3:]))
        best = min(best, res)
    pos_res, rot_res = np.linalg.norm(err[:3]), np.linalg.norm(err[3:])
    if pos_res <= tol_pos and rot_res <= tol_rot:
        return q
    raise UnreachableTargetError(
        f"IK did not converge in {max_iter} iterations "
        f"(best residual {best[0]:.3e} m, {best[1]:.3e} rad)",
        pos_residual=best[0],
        rot_residual=best[1],
    )
