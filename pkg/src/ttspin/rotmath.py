"""Rotation representations, conversions and distance metrics.

Quaternions are stored scalar-first ``(w, x, y, z)``. All value types are
immutable and normalised on construction, so every function here is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

_EPS = 1e-12
LOGO_BASE = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class Quat:
    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        n = math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)
        if not np.isfinite(n) or n < _EPS:
            raise ValueError("quaternion must have finite, non-zero norm")
        for name in "wxyz":
            object.__setattr__(self, name, float(getattr(self, name)) / n)

    @classmethod
    def identity(cls) -> "Quat":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, a: Sequence[float]) -> "Quat":
        return cls(*(float(v) for v in a))

    @classmethod
    def from_rotvec(cls, rotvec: Sequence[float]) -> "Quat":
        """Exponential map: rotation by ``|rotvec|`` radians about ``rotvec``."""
        rv = np.asarray(rotvec, dtype=float)
        theta = float(np.linalg.norm(rv))
        if theta < 1e-300:
            return cls.identity()
        s = math.sin(theta / 2) / theta
        return cls(math.cos(theta / 2), *(s * rv))

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    @property
    def vec(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def __neg__(self) -> "Quat":
        # exact: skip renormalisation so that -q is bitwise the negation of q
        out = object.__new__(Quat)
        for name in "wxyz":
            object.__setattr__(out, name, -getattr(self, name))
        return out

    def __mul__(self, other: "Quat") -> "Quat":
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return Quat(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def conjugate(self) -> "Quat":
        return Quat(self.w, -self.x, -self.y, -self.z)

    def rotate(self, v: Sequence[float]) -> np.ndarray:
        """Apply the rotation to a 3-vector (or an ``(n, 3)`` array)."""
        return np.asarray(v, dtype=float) @ quat_to_matrix(self).matrix.T


@dataclass(frozen=True)
class AxisAngle:
    """Axis-angle pair with angle canonicalised to ``[0, pi]``.

    At the degenerate angles 0 and pi the axis sign is fixed so that its first
    non-zero component is positive.
    """

    axis: tuple
    angle: float

    def __post_init__(self):
        a = np.asarray(self.axis, dtype=float)
        n = float(np.linalg.norm(a))
        if a.shape != (3,) or n < _EPS:
            raise ValueError("axis must be a non-zero 3-vector")
        a = a / n
        angle = math.fmod(float(self.angle), 2 * math.pi)
        if angle < 0:
            angle += 2 * math.pi
        if angle > math.pi:
            angle = 2 * math.pi - angle
            a = -a
        if angle < 1e-15 or abs(angle - math.pi) < 1e-15:
            nz = a[np.abs(a) > 1e-15]
            if nz.size and nz[0] < 0:
                a = -a
        object.__setattr__(self, "axis", tuple(float(v) for v in a))
        object.__setattr__(self, "angle", angle)

    @property
    def rotvec(self) -> np.ndarray:
        return np.asarray(self.axis) * self.angle


@dataclass(frozen=True, eq=False)
class RotMatrix:
    matrix: np.ndarray = field(repr=True)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("rotation matrix must be 3x3")
        if not np.allclose(m.T @ m, np.eye(3), atol=1e-9) or abs(np.linalg.det(m) - 1) > 1e-9:
            raise ValueError("matrix is not in SO(3)")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "RotMatrix":
        return cls(np.eye(3))


Rotation = Union[Quat, AxisAngle, RotMatrix]


def quat_to_matrix(q: Quat) -> RotMatrix:
    w, x, y, z = q.w, q.x, q.y, q.z
    m = np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )
    return RotMatrix(m)


def matrix_to_quat(r: RotMatrix) -> Quat:
    # Shepperd: pivot on the largest diagonal combination for stability.
    m = r.matrix
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    cands = [tr, m[0, 0], m[1, 1], m[2, 2]]
    k = int(np.argmax(cands))
    if k == 0:
        s = 2.0 * math.sqrt(max(1.0 + tr, 0.0))
        q = (0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s)
    elif k == 1:
        s = 2.0 * math.sqrt(max(1.0 + m[0, 0] - m[1, 1] - m[2, 2], 0.0))
        q = ((m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s)
    elif k == 2:
        s = 2.0 * math.sqrt(max(1.0 + m[1, 1] - m[0, 0] - m[2, 2], 0.0))
        q = ((m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s)
    else:
        s = 2.0 * math.sqrt(max(1.0 + m[2, 2] - m[0, 0] - m[1, 1], 0.0))
        q = ((m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s)
    if q[0] < 0:
        q = tuple(-v for v in q)
    return Quat(*q)


def axis_angle_to_quat(aa: AxisAngle) -> Quat:
    return Quat.from_rotvec(aa.rotvec)


def quat_to_axis_angle(q: Quat) -> AxisAngle:
    if q.w < 0:
        q = -q
    s = float(np.linalg.norm(q.vec))
    angle = 2.0 * math.atan2(s, q.w)
    if s < 1e-300:
        return AxisAngle((1.0, 0.0, 0.0), 0.0)
    return AxisAngle(tuple(q.vec / s), angle)


def _to_quat(a: Rotation) -> Quat:
    if isinstance(a, Quat):
        return a
    if isinstance(a, AxisAngle):
        return axis_angle_to_quat(a)
    if isinstance(a, RotMatrix):
        return matrix_to_quat(a)
    raise TypeError(f"not a rotation: {type(a).__name__}")


def convert(a: Rotation, target: type) -> Rotation:
    """Convert any rotation value to ``target`` (``Quat``, ``AxisAngle`` or ``RotMatrix``)."""
    if isinstance(a, target):
        return a
    if target is RotMatrix and isinstance(a, AxisAngle):
        return quat_to_matrix(axis_angle_to_quat(a))
    q = _to_quat(a)
    if target is Quat:
        return q
    if target is RotMatrix:
        return quat_to_matrix(q)
    if target is AxisAngle:
        return quat_to_axis_angle(q)
    raise TypeError(f"unsupported target {target!r}")


def geodesic_matrix(r1: RotMatrix, r2: RotMatrix) -> float:
    """Angle of the rotation aligning ``r1`` with ``r2``.

    Equal to ``arccos((tr(R1^T R2) - 1) / 2)``. The cosine comes from the trace
    and the sine from the skew part, so the result stays accurate near 0 and pi
    where a clamped arccos loses half its digits.
    """
    r = r1.matrix.T @ r2.matrix
    cos_t = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
    sin_t = 0.5 * math.sqrt((r[2, 1] - r[1, 2]) ** 2 + (r[0, 2] - r[2, 0]) ** 2 + (r[1, 0] - r[0, 1]) ** 2)
    return float(math.atan2(sin_t, cos_t))


def geodesic_quat(q1: Quat, q2: Quat) -> float:
    """``2 arccos(|<q1, q2>|)``, evaluated in half-angle form; ``d(q, -q) == 0``."""
    a, b = q1.as_array(), q2.as_array()
    if np.dot(a, b) < 0:
        b = -b
    return float(4.0 * math.atan2(np.linalg.norm(a - b), np.linalg.norm(a + b)))


def angle_between(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(math.atan2(np.linalg.norm(np.cross(a, b)), np.dot(a, b)))


def logo_direction(q: Quat) -> np.ndarray:
    """Where the base logo position ``(0, 0, 1)`` ends up under ``q``."""
    return q.rotate(LOGO_BASE)


def vector_angle(q1: Quat, q2: Quat) -> float:
    """Angle between the logo positions of two orientations; blind to twist about the logo."""
    return angle_between(logo_direction(q1), logo_direction(q2))


@dataclass(frozen=True)
class PoseOutput:
    """Rotation part (4 for quaternion, 3 for axis*angle) plus a visibility value.

    Visibility is kept in the dataset's label range ``[-1, 1]`` (-1 = logo not
    visible) and clamped into it.
    """

    rotation: tuple
    visibility: float

    def __post_init__(self):
        rot = tuple(float(v) for v in np.ravel(self.rotation))
        if len(rot) not in (3, 4):
            raise ValueError("rotation part must have 3 (axis-angle) or 4 (quaternion) entries")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "visibility", float(np.clip(self.visibility, -1.0, 1.0)))

    @property
    def gate(self) -> float:
        """Visibility label mapped from ``[-1, 1]`` to ``[0, 1]``."""
        return (self.visibility + 1.0) / 2.0

    def as_quat(self) -> Quat:
        if len(self.rotation) == 4:
            return Quat(*self.rotation)
        return Quat.from_rotvec(self.rotation)


def loss_sq(o: PoseOutput, t: PoseOutput) -> float:
    """Squared-error conditional loss (labelled L1 in the original training setup)."""
    _check_pair(o, t)
    ov, tv = o.gate, t.gate
    a, b = np.asarray(o.rotation), np.asarray(t.rotation)
    orient = min(np.sum((a - b) ** 2), np.sum((a + b) ** 2))
    return float((ov - tv) ** 2 + tv * orient)


def loss_abs(o: PoseOutput, t: PoseOutput) -> float:
    """Absolute-error conditional loss (labelled L2 in the original training setup)."""
    _check_pair(o, t)
    ov, tv = o.gate, t.gate
    a, b = np.asarray(o.rotation), np.asarray(t.rotation)
    orient = min(np.sum(np.abs(a - b)), np.sum(np.abs(a + b)))
    return float(abs(ov - tv) + tv * orient)


def loss_geodesic(o: PoseOutput, t: PoseOutput) -> float:
    _check_pair(o, t)
    ov, tv = o.gate, t.gate
    orient = geodesic_quat(o.as_quat(), t.as_quat()) if tv > 0 else 0.0
    return float(abs(ov - tv) + tv * orient)


_LOSSES = {"sq": loss_sq, "abs": loss_abs, "geodesic": loss_geodesic}


def conditional_loss(o: PoseOutput, t: PoseOutput, norm: str = "abs") -> float:
    """Visibility-gated pose loss; ``norm`` is one of ``sq``, ``abs``, ``geodesic``."""
    try:
        fn = _LOSSES[norm]
    except KeyError:
        raise ValueError(f"unknown norm {norm!r}; expected one of {sorted(_LOSSES)}") from None
    return fn(o, t)


def _check_pair(o: PoseOutput, t: PoseOutput) -> None:
    if len(o.rotation) != len(t.rotation):
        raise ValueError(
            f"representation mismatch: output has {len(o.rotation)} rotation entries, target {len(t.rotation)}"
        )


def random_quat(rng: np.random.Generator) -> Quat:
    """Uniformly distributed rotation."""
    v = rng.normal(size=4)
    return Quat(*v)
