"""Toolpaths (linear + circular segments), a minimal G-code subset parser,
chord-tolerance discretization and synchronized dual-robot setpoint
generation with tension offsets.

G-code is parsed in mm / mm/min; everything internal is m / rad. The tool
orientation is held fixed along the path (3-axis milling).
"""

from __future__ import annotations

import io
import json
import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import (
    ContinuityError,
    InvalidInputError,
    MalformedArcError,
    PlanError,
    UnreachableTargetError,
    UnsupportedGcodeError,
    WorkspaceError,
)
from .geometry import Pose, quat_from_rotvec, quat_multiply
from .kinematics import inverse_kinematics
from .stiffness import CoupledSystem, Wrench, tension_offset

_POSITION_TOL = 1e-9
_ARC_RADIUS_TOL = 10e-6  # 10 um start/end radius mismatch
DEFAULT_JOINT_JUMP_MAX = 0.2  # rad, guards against IK branch flips


@dataclass(frozen=True)
class LinearSegment:
    start: Pose
    end: Pose

    @property
    def length(self):
        return float(np.linalg.norm(self.end.position - self.start.position))


@dataclass(frozen=True)
class ArcSegment:
    """Circular arc about `center` in the plane normal to `normal`,
    starting at `start` and sweeping `sweep` rad (sign by right-hand rule
    about the normal)."""

    center: np.ndarray
    normal: np.ndarray
    start: Pose
    sweep: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        n = np.asarray(self.normal, dtype=float)
        if c.shape != (3,) or n.shape != (3,):
            raise InvalidInputError("arc center and normal must be 3-vectors")
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise InvalidInputError("arc normal must be unit length (1e-9)")
        r = self.start.position - c
        if abs(float(np.dot(r, n))) > _POSITION_TOL + 1e-12 * np.linalg.norm(r):
            raise InvalidInputError("arc start does not lie in the plane through the center")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "normal", n)

    @property
    def radius(self):
        return float(np.linalg.norm(self.start.position - self.center))

    def point_at(self, angle):
        u = self.start.position - self.center
        v = np.cross(self.normal, u)
        return self.center + math.cos(angle) * u + math.sin(angle) * v

    def pose_at(self, angle):
        return Pose(self.point_at(angle), self.start.quaternion)

    @property
    def end(self) -> Pose:
        return self.pose_at(self.sweep)

    @property
    def length(self):
        return self.radius * abs(self.sweep)


@dataclass(frozen=True)
class ToolPath:
    segments: tuple
    feed_mm_min: float = 0.0

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise InvalidInputError("toolpath has no segments")
        for prev, cur in zip(segs, segs[1:]):
            gap = np.linalg.norm(cur.start.position - prev.end.position)
            if gap > _POSITION_TOL:
                raise InvalidInputError(f"toolpath is not C0-continuous (gap {gap:.3e} m)")
        object.__setattr__(self, "segments", segs)

    @property
    def length(self):
        return sum(s.length for s in self.segments)


# ---------------------------------------------------------------------------
# G-code subset parser

_WORD_RE = re.compile(r"([A-Za-z])\s*([+-]?(?:\d+\.?\d*|\.\d+))")
_SUPPORTED_LETTERS = set("GXYZIJKF")
_MM = 1e-3


def _strip_comments(line):
    line = re.sub(r"\([^)]*\)", " ", line)
    return line.split(";", 1)[0]


def parse_gcode(text, orientation=None) -> ToolPath:
    """Parse the supported G-code subset into a ToolPath.

    Supported words: G0/G1 (linear), G2/G3 (cw/ccw arc with I/J/K center
    offsets), X/Y/Z coordinates in mm, F feed in mm/min. Motion words are
    modal. Anything else raises with the offending line number.
    """
    if not text or not text.strip():
        raise InvalidInputError("G-code text is empty")
    if orientation is None:
        orientation = np.array([1.0, 0.0, 0.0, 0.0])
    pos = np.zeros(3)
    motion = None
    feed = 0.0
    segments = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comments(raw).strip()
        if not line:
            continue
        words = []
        consumed = 0
        for m in _WORD_RE.finditer(line):
            if line[consumed : m.start()].strip():
                raise UnsupportedGcodeError(
                    f"line {lineno}: unparseable text {line[consumed:m.start()]!r}", line=lineno
                )
            words.append((m.group(1).upper(), float(m.group(2))))
            consumed = m.end()
        if line[consumed:].strip():
            raise UnsupportedGcodeError(
                f"line {lineno}: unparseable text {line[consumed:]!r}", line=lineno
            )
        coords = {}
        center_offset = {}
        for letter, value in words:
            if letter not in _SUPPORTED_LETTERS:
                raise UnsupportedGcodeError(f"line {lineno}: unsupported word {letter}{value:g}", line=lineno)
            if letter == "G":
                if value not in (0.0, 1.0, 2.0, 3.0):
                    raise UnsupportedGcodeError(f"line {lineno}: unsupported G{value:g}", line=lineno)
                motion = int(value)
            elif letter == "F":
                feed = value
            elif letter in "XYZ":
                coords["XYZ".index(letter)] = value * _MM
            else:
                center_offset["IJK".index(letter)] = value * _MM
        if not coords and not center_offset:
            continue
        if motion is None:
            raise UnsupportedGcodeError(
                f"line {lineno}: coordinates before any motion word", line=lineno
            )
        target = pos.copy()
        for axis, value in coords.items():
            target[axis] = value
        if motion in (0, 1):
            if center_offset:
                raise UnsupportedGcodeError(
                    f"line {lineno}: I/J/K only valid with G2/G3", line=lineno
                )
            if np.linalg.norm(target - pos) > 0:
                segments.append(LinearSegment(Pose(pos, orientation), Pose(target, orientation)))
        else:
            if not center_offset:
                raise UnsupportedGcodeError(f"line {lineno}: arc without I/J/K center", line=lineno)
            center = pos.copy()
            for axis, value in center_offset.items():
                center[axis] += value
            r_start = np.linalg.norm(pos - center)
            r_end = np.linalg.norm(target - center)
            if abs(r_start - r_end) > _ARC_RADIUS_TOL:
                raise MalformedArcError(
                    f"line {lineno}: arc radii differ by {abs(r_start - r_end) * 1e6:.1f} um "
                    f"(start {r_start * 1e3:.3f} mm, end {r_end * 1e3:.3f} mm)",
                    line=lineno,
                )
            if r_start == 0:
                raise MalformedArcError(f"line {lineno}: arc has zero radius", line=lineno)
            theta_s = math.atan2(pos[1] - center[1], pos[0] - center[0])
            theta_e = math.atan2(target[1] - center[1], target[0] - center[0])
            if motion == 3:  # counter-clockwise about +Z
                sweep = (theta_e - theta_s) % (2 * math.pi)
                if sweep == 0.0:
                    sweep = 2 * math.pi
            else:  # clockwise
                sweep = -((theta_s - theta_e) % (2 * math.pi))
                if sweep == 0.0:
                    sweep = -2 * math.pi
            segments.append(
                ArcSegment(center, np.array([0.0, 0.0, 1.0]), Pose(pos, orientation), sweep)
            )
            # Snap the running position to the arc's computed endpoint so the
            # chain stays continuous to machine precision.
            target = segments[-1].end.position
        pos = target
    if not segments:
        raise InvalidInputError("G-code produced no motion segments")
    return ToolPath(tuple(segments), feed_mm_min=feed)


def translate_path(path: ToolPath, delta) -> ToolPath:
    """Shift a whole path by a world-frame vector (work offset)."""
    delta = np.asarray(delta, dtype=float)
    segments = []
    for s in path.segments:
        if isinstance(s, LinearSegment):
            segments.append(
                LinearSegment(
                    Pose(s.start.position + delta, s.start.quaternion),
                    Pose(s.end.position + delta, s.end.quaternion),
                )
            )
        else:
            segments.append(
                ArcSegment(
                    s.center + delta,
                    s.normal,
                    Pose(s.start.position + delta, s.start.quaternion),
                    s.sweep,
                )
            )
    return ToolPath(tuple(segments), feed_mm_min=path.feed_mm_min)


# ---------------------------------------------------------------------------
# Native JSON format (17-significant-digit floats, bit-exact round trip)


def _fmt(x):
    return format(float(x), ".17g")


def _dump_json(obj):
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(k)}: {_dump_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_dump_json(v) for v in obj) + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int,)):
        return str(obj)
    if isinstance(obj, float):
        return _fmt(obj)
    return json.dumps(obj)


def _pose_to_dict(p: Pose):
    return {"position_m": list(p.position), "quaternion_wxyz": list(p.quaternion)}


def _pose_from_dict(d):
    return Pose(np.array(d["position_m"], dtype=float), np.array(d["quaternion_wxyz"], dtype=float))


def path_to_json(path: ToolPath) -> str:
    segs = []
    for s in path.segments:
        if isinstance(s, LinearSegment):
            segs.append({"type": "linear", "start": _pose_to_dict(s.start), "end": _pose_to_dict(s.end)})
        else:
            segs.append(
                {
                    "type": "arc",
                    "center_m": list(s.center),
                    "normal": list(s.normal),
                    "start": _pose_to_dict(s.start),
                    "sweep_rad": float(s.sweep),
                }
            )
    return _dump_json({"feed_mm_min": float(path.feed_mm_min), "segments": segs}) + "\n"


def path_from_json(text) -> ToolPath:
    doc = json.loads(text)
    segments = []
    for s in doc["segments"]:
        if s["type"] == "linear":
            segments.append(LinearSegment(_pose_from_dict(s["start"]), _pose_from_dict(s["end"])))
        elif s["type"] == "arc":
            segments.append(
                ArcSegment(
                    np.array(s["center_m"], dtype=float),
                    np.array(s["normal"], dtype=float),
                    _pose_from_dict(s["start"]),
                    float(s["sweep_rad"]),
                )
            )
        else:
            raise InvalidInputError(f"unknown segment type {s['type']!r}")
    return ToolPath(tuple(segments), feed_mm_min=float(doc.get("feed_mm_min", 0.0)))


# ---------------------------------------------------------------------------
# Discretization


def _subdivisions(x):
    """Smallest power of two >= x (>= 1), so that refinement by halving the
    step exactly doubles the interval count."""
    if x <= 1.0:
        return 1
    return 1 << math.ceil(math.log2(x))


def discretize(path: ToolPath, chord_tol, max_step):
    """Sample poses along the path: chordal deviation on arcs <= chord_tol,
    consecutive samples <= max_step apart, endpoints exact."""
    if chord_tol <= 0 or max_step <= 0:
        raise InvalidInputError("chord_tol and max_step must be positive")
    poses = [path.segments[0].start]
    for seg in path.segments:
        if isinstance(seg, LinearSegment):
            n = _subdivisions(seg.length / max_step)
            for j in range(1, n):
                p = seg.start.position + (j / n) * (seg.end.position - seg.start.position)
                poses.append(Pose(p, seg.start.quaternion))
            poses.append(seg.end)
        else:
            if seg.sweep == 0.0:
                continue
            r = seg.radius
            if chord_tol < r:
                dtheta_chord = 2 * math.acos(1 - chord_tol / r)
            else:
                dtheta_chord = math.pi
            dtheta = min(dtheta_chord, max_step / r)
            n = _subdivisions(abs(seg.sweep) / dtheta)
            for j in range(1, n):
                poses.append(seg.pose_at(seg.sweep * j / n))
            poses.append(seg.end)
    return poses


# ---------------------------------------------------------------------------
# Synchronized dual-robot planning


@dataclass(frozen=True)
class SetpointPair:
    """One synchronized program index: tool pose, both flange targets and
    the joint solutions realizing them."""

    index: int
    tool_pose: Pose
    robot1_flange: Pose
    robot2_flange_nominal: Pose
    robot2_flange_commanded: Pose
    q1: np.ndarray
    q2: np.ndarray


@dataclass(frozen=True)
class SyncProgram:
    pairs: tuple
    tension: Wrench
    feed_mm_min: float = 0.0
    chord_tol: float = 0.0
    max_step: float = 0.0

    def __post_init__(self):
        pairs = tuple(self.pairs)
        if not pairs:
            raise InvalidInputError("sync program has no setpoints")
        for prev, cur in zip(pairs, pairs[1:]):
            if cur.index <= prev.index:
                raise InvalidInputError("setpoint indices must be strictly increasing")
        object.__setattr__(self, "pairs", pairs)


def apply_world_offset(pose: Pose, offset) -> Pose:
    """Apply a 6-D world-frame displacement (3 translations, 3 rotations as
    a rotation vector) to a pose."""
    offset = np.asarray(offset, dtype=float)
    return Pose(
        pose.position + offset[:3],
        quat_multiply(quat_from_rotvec(offset[3:]), pose.quaternion),
    )


def _in_box(p, box):
    center, size = box
    return bool(np.all(np.abs(p - center) <= size / 2 + 1e-12))


def plan_sync(
    sys: CoupledSystem,
    path: ToolPath,
    tension: Wrench,
    ik_seeds,
    chord_tol=1e-5,
    max_step=5e-3,
    workspace_box=None,
    joint_jump_max=DEFAULT_JOINT_JUMP_MAX,
    tol_pos=1e-6,
    tol_rot=1e-6,
    max_iter=200,
) -> SyncProgram:
    """Generate synchronized setpoint pairs along the path.

    The tension offset for robot 2 is recomputed at every setpoint from
    the local configuration; IK is seeded with the previous solution so
    the joint trajectories stay on one branch. A joint jump above
    `joint_jump_max` between consecutive pairs aborts planning.

    workspace_box: optional (center, size) arrays in m; every discretized
    tool position must lie inside.
    """
    poses = discretize(path, chord_tol, max_step)
    if workspace_box is not None:
        box = (np.asarray(workspace_box[0], dtype=float), np.asarray(workspace_box[1], dtype=float))
        for i, pose in enumerate(poses):
            if not _in_box(pose.position, box):
                raise WorkspaceError(
                    f"tool pose {i} at {pose.position} lies outside the workspace box", index=i
                )
    seed1, seed2 = (np.asarray(s, dtype=float) for s in ik_seeds)
    tool_inv = sys.tool_offset.inverse()
    q1_prev, q2_prev = seed1, seed2
    pairs = []
    for i, tool_pose in enumerate(poses):
        r1 = tool_pose @ tool_inv
        r2_nominal = r1 @ sys.flange2_offset
        try:
            q1 = inverse_kinematics(sys.arm1, r1, q1_prev, tol_pos, tol_rot, max_iter)
            q2_nominal = inverse_kinematics(sys.arm2, r2_nominal, q2_prev, tol_pos, tol_rot, max_iter)
            offset = tension_offset(sys, q1, q2_nominal, tension)
            r2_commanded = apply_world_offset(r2_nominal, offset)
            q2 = inverse_kinematics(sys.arm2, r2_commanded, q2_nominal, tol_pos, tol_rot, max_iter)
        except UnreachableTargetError as exc:
            raise PlanError(f"IK failed at setpoint {i}: {exc}", index=i) from exc
        if pairs:
            jump = max(np.max(np.abs(q1 - q1_prev)), np.max(np.abs(q2 - q2_prev)))
            if jump > joint_jump_max:
                raise ContinuityError(
                    f"joint jump {jump:.3f} rad at setpoint {i} exceeds {joint_jump_max} rad",
                    index=i,
                )
        pairs.append(
            SetpointPair(
                index=i,
                tool_pose=tool_pose,
                robot1_flange=r1,
                robot2_flange_nominal=r2_nominal,
                robot2_flange_commanded=r2_commanded,
                q1=q1,
                q2=q2,
            )
        )
        q1_prev, q2_prev = q1, q2
    return SyncProgram(
        tuple(pairs), tension=tension, feed_mm_min=path.feed_mm_min,
        chord_tol=chord_tol, max_step=max_step,
    )


# ---------------------------------------------------------------------------
# SyncProgram CSV interchange

_POSE_FIELDS = ("x", "y", "z", "qw", "qx", "qy", "qz")
_POSE_COLS = ("tool", "r1", "r2_nominal", "r2_commanded")


def _pose_values(p: Pose):
    return list(p.position) + list(p.quaternion)


def _pose_from_values(v):
    return Pose(np.array(v[:3], dtype=float), np.array(v[3:7], dtype=float))


def program_to_csv(program: SyncProgram) -> str:
    buf = io.StringIO()
    w = program.tension.as_vector()
    buf.write(f"# feed_mm_min={_fmt(program.feed_mm_min)}\n")
    buf.write("# tension_wrench=" + " ".join(_fmt(x) for x in w) + "\n")
    buf.write(f"# chord_tol_m={_fmt(program.chord_tol)}\n")
    buf.write(f"# max_step_m={_fmt(program.max_step)}\n")
    cols = ["index"]
    for name in _POSE_COLS:
        cols += [f"{name}_{f}" for f in _POSE_FIELDS]
    cols += [f"q1_{i}" for i in range(6)] + [f"q2_{i}" for i in range(6)]
    buf.write(",".join(cols) + "\n")
    for p in program.pairs:
        row = [str(p.index)]
        for pose in (p.tool_pose, p.robot1_flange, p.robot2_flange_nominal, p.robot2_flange_commanded):
            row += [_fmt(v) for v in _pose_values(pose)]
        row += [_fmt(v) for v in p.q1] + [_fmt(v) for v in p.q2]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def program_from_csv(text) -> SyncProgram:
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
    if not rows:
        raise InvalidInputError("program CSV has no data rows")
    wrench_vals = [float(x) for x in meta.get("tension_wrench", "0 0 0 0 0 0").split()]
    pairs = []
    for row in rows[1:]:
        vals = row.split(",")
        idx = int(vals[0])
        nums = [float(x) for x in vals[1:]]
        poses = [_pose_from_values(nums[7 * i : 7 * i + 7]) for i in range(4)]
        q1 = np.array(nums[28:34])
        q2 = np.array(nums[34:40])
        pairs.append(SetpointPair(idx, poses[0], poses[1], poses[2], poses[3], q1, q2))
    return SyncProgram(
        tuple(pairs),
        tension=Wrench.from_vector(np.array(wrench_vals)),
        feed_mm_min=float(meta.get("feed_mm_min", 0.0)),
        chord_tol=float(meta.get("chord_tol_m", 0.0)),
        max_step=float(meta.get("max_step_m", 0.0)),
    )
