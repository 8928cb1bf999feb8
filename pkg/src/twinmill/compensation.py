"""Tension-induced deformation prediction and rigid-transform compensation.

The tensioned system deflects by a nearly constant vector along the path,
so the deviation between an untensioned reference trace and a tensioned
trace is well captured by a single rotation + translation; removing that
transform compensates the deformation.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, InvalidInputError, SingularConfigurationError
from .geometry import quat_from_matrix, quat_to_matrix
from .pathplan import SyncProgram
from .stiffness import CoupledSystem, coupled_stiffness

_COLLINEAR_REL_TOL = 1e-9


@dataclass(frozen=True)
class PathTrace:
    """Ordered tool positions from one (real or simulated) path execution."""

    points: np.ndarray
    label: str = ""
    tension: float = 0.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3 or not np.all(np.isfinite(pts)):
            raise InvalidInputError("trace points must be a finite Nx3 array")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True)
class RigidTransform:
    """Proper rigid motion p -> R p + t (no scale, no reflection)."""

    rotation: np.ndarray  # unit quaternion (w, x, y, z)
    translation: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float)
        if q.shape != (4,) or abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise InvalidInputError("rotation must be a unit quaternion (w, x, y, z)")
        if t.shape != (3,) or not np.all(np.isfinite(t)):
            raise InvalidInputError("translation must be a finite 3-vector")
        if q[0] < 0:
            q = -q
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity():
        return RigidTransform(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))

    def matrix(self):
        return quat_to_matrix(self.rotation)

    def apply(self, points):
        return np.asarray(points, dtype=float) @ self.matrix().T + self.translation

    def apply_inverse(self, points):
        return (np.asarray(points, dtype=float) - self.translation) @ self.matrix()


def nominal_trace(program: SyncProgram, label="nominal") -> PathTrace:
    """Undeformed tool positions of a program."""
    pts = np.array([p.tool_pose.position for p in program.pairs])
    return PathTrace(pts, label=label, tension=0.0)


def simulate_deformation(sys: CoupledSystem, program: SyncProgram, label="deformed") -> PathTrace:
    """Displace every tool position by compliance x internal wrench.

    The compliance is the inverse of the coupled tool-point stiffness at
    that setpoint's configuration, so the deformation tracks any (small)
    configuration dependence along the path. The commanded arm-2 joints
    deviate from the nominal attach frame by the setpoint offset, so the
    closure check runs with a correspondingly widened tolerance.
    """
    w = program.tension.as_vector()
    pts = np.empty((len(program.pairs), 3))
    for i, pair in enumerate(program.pairs):
        try:
            K = coupled_stiffness(sys, pair.q1, pair.q2, closure_tol=0.01)
        except SingularConfigurationError as exc:
            raise SingularConfigurationError(f"setpoint {i}: {exc}") from exc
        delta = np.linalg.solve(K, w)
        pts[i] = pair.tool_pose.position + delta[:3]
    return PathTrace(pts, label=label, tension=float(np.linalg.norm(program.tension.force)))


def fit_rigid(reference: PathTrace, measured: PathTrace) -> RigidTransform:
    """Least-squares rotation + translation mapping reference onto measured
    (orthogonal Procrustes, correspondence by index, reflection excluded)."""
    A = reference.points
    B = measured.points
    if A.shape != B.shape:
        raise InvalidInputError("reference and measured traces must have equal point counts")
    if A.shape[0] < 3:
        raise InvalidInputError("at least 3 point pairs are required for a rigid fit")
    ca = A.mean(axis=0)
    cb = B.mean(axis=0)
    Ac = A - ca
    sv = np.linalg.svd(Ac, compute_uv=False)
    if sv[1] <= _COLLINEAR_REL_TOL * sv[0]:
        raise DegenerateGeometryError("reference points are collinear; the rotation is not unique")
    H = Ac.T @ (B - cb)
    U, _, Vt = np.linalg.svd(H)
    V = Vt.T
    d = np.sign(np.linalg.det(V @ U.T))
    R = V @ np.diag([1.0, 1.0, d]) @ U.T
    t = cb - R @ ca
    return RigidTransform(quat_from_matrix(R), t)


def compensate(measured: PathTrace, transform: RigidTransform) -> PathTrace:
    """Remove a fitted rigid deformation: p -> R^-1 (p - t)."""
    return PathTrace(
        transform.apply_inverse(measured.points),
        label=(measured.label + "_compensated") if measured.label else "compensated",
        tension=measured.tension,
        noise_sigma=measured.noise_sigma,
    )


@dataclass(frozen=True)
class ResidualReport:
    """Per-point deviations (measured - reference) with summary statistics."""

    deviations: np.ndarray
    rms: float
    max_norm: float
    axis_mean: np.ndarray
    axis_std: np.ndarray
    axis_max_abs: np.ndarray


def residual_report(reference: PathTrace, measured: PathTrace) -> ResidualReport:
    if reference.points.shape != measured.points.shape:
        raise InvalidInputError("traces must have equal point counts")
    dev = measured.points - reference.points
    norms = np.linalg.norm(dev, axis=1)
    return ResidualReport(
        deviations=dev,
        rms=float(np.sqrt(np.mean(norms**2))),
        max_norm=float(np.max(norms)),
        axis_mean=dev.mean(axis=0),
        axis_std=dev.std(axis=0),
        axis_max_abs=np.max(np.abs(dev), axis=0),
    )


# ---------------------------------------------------------------------------
# CSV interchange


def trace_to_csv(trace: PathTrace) -> str:
    buf = io.StringIO()
    buf.write(f"# label={trace.label}\n")
    buf.write(f"# tension_N={trace.tension!r}\n")
    buf.write(f"# noise_sigma_m={trace.noise_sigma!r}\n")
    buf.write("index,x_m,y_m,z_m\n")
    for i, p in enumerate(trace.points):
        buf.write(f"{i},{p[0]:.17g},{p[1]:.17g},{p[2]:.17g}\n")
    return buf.getvalue()


def trace_from_csv(text) -> PathTrace:
    meta = {}
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            meta[key.strip()] = value.strip()
        else:
            rows.append(line)
    if not rows or rows[0] != "index,x_m,y_m,z_m":
        raise InvalidInputError("trace CSV must start with header 'index,x_m,y_m,z_m'")
    pts = np.array([[float(x) for x in row.split(",")[1:]] for row in rows[1:]])
    return PathTrace(
        pts,
        label=meta.get("label", ""),
        tension=float(meta.get("tension_N", 0.0)),
        noise_sigma=float(meta.get("noise_sigma_m", 0.0)),
    )


def report_to_csv(report: ResidualReport) -> str:
    buf = io.StringIO()
    buf.write(f"# rms_m={report.rms!r}\n")
    buf.write(f"# max_norm_m={report.max_norm!r}\n")
    for name, vec in (
        ("mean", report.axis_mean),
        ("std", report.axis_std),
        ("max_abs", report.axis_max_abs),
    ):
        buf.write(f"# {name}_xyz_m=" + " ".join(repr(float(v)) for v in vec) + "\n")
    buf.write("index,dx_m,dy_m,dz_m\n")
    for i, d in enumerate(report.deviations):
        buf.write(f"{i},{d[0]:.17g},{d[1]:.17g},{d[2]:.17g}\n")
    return buf.getvalue()
