"""Spin from the brand logo.

Pipeline per frame: contour pixels -> unit-sphere points -> logo centre
(normalised mean, with a circular-segment correction when the logo is cut
by the limb). Over a track: fit the plane the centre moves in, unwrap the
in-plane angle and regress it against time.

Directions live in the camera-aligned ball frame (z towards the camera).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import least_squares

from .magnus_fit import EstimationError, SpinEstimate
from .physics import LogoTrack
from .rotmath import Quat, logo_direction


class InsufficientVisibilityError(EstimationError):
    code = "insufficient-visibility"


class SpinAxisIndeterminateError(EstimationError):
    code = "spin-axis-indeterminate"


class DegenerateContourError(EstimationError):
    code = "degenerate-contour"


@dataclass(frozen=True)
class LogoConfig:
    logo_radius: float = 0.0065  # m
    ball_radius: float = 0.02  # m
    limb_margin_deg: float = 10.0
    plane_weight: float = 1.0  # circle-distance term relative to plane distance
    segment_fit: bool = True
    min_circle_radius: float = 0.1  # below: logo sits almost on the spin axis


@dataclass(frozen=True, eq=False)
class ContourFrame:
    t: float
    pixels: np.ndarray  # (k, 2) offsets from the ball centre, k may be 0
    radius_px: float


# --- per-frame geometry -----------------------------------------------------


def project_contour(pixels, radius_px: float) -> np.ndarray:
    """Lift image offsets onto the camera-facing unit hemisphere."""
    if radius_px <= 0:
        raise ValueError("radius_px must be positive")
    uv = np.asarray(pixels, dtype=float).reshape(-1, 2)
    if len(uv) == 0:
        raise DegenerateContourError("empty contour")
    r_px = np.hypot(uv[:, 0], uv[:, 1])
    if np.any(r_px > radius_px + 1.0):
        raise ValueError("contour pixel lies outside the ball disc")
    xy = uv / radius_px
    rho = np.hypot(xy[:, 0], xy[:, 1])
    outside = rho > 1.0
    xy[outside] /= rho[outside, None]
    z = np.sqrt(np.clip(1.0 - np.sum(xy**2, axis=1), 0.0, None))
    return np.column_stack([xy, z])


def contour_centroid(points) -> np.ndarray:
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(p) < 3:
        raise DegenerateContourError("need at least 3 contour points")
    m = p.mean(axis=0)
    n = np.linalg.norm(m)
    if n <= 1e-6:
        raise DegenerateContourError("contour points average to the sphere centre")
    return m / n


def segment_area(alpha: float, r: float) -> float:
    """Area of the circular segment with half-angle ``alpha`` of a circle of radius ``r``."""
    return 0.5 * r**2 * _two_alpha_minus_sin(alpha)


def _two_alpha_minus_sin(alpha: float) -> float:
    x = 2.0 * alpha
    if x < 1e-3:
        return x**3 / 6.0 - x**5 / 120.0
    return x - math.sin(x)


def segment_centroid_distance(alpha: float, r: float) -> float:
    """Distance from the circle centre to the centroid of its segment with half-angle ``alpha``."""
    if alpha >= math.pi:
        return 0.0
    if alpha <= 0:
        return r
    return 4.0 * r * math.sin(alpha) ** 3 / (3.0 * _two_alpha_minus_sin(alpha))


def segment_half_angle(area: float, r: float, tol: float = 1e-13) -> float:
    """Invert ``segment_area`` on ``(0, pi]`` by bisection."""
    full = math.pi * r**2
    if not 0 < area <= full:
        raise ValueError("area outside (0, pi r^2]")
    if area == full:
        return math.pi
    lo, hi = 0.0, math.pi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if segment_area(mid, r) < area:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def polar_angle(points) -> np.ndarray:
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    return np.arccos(np.clip(p[:, 2], -1.0, 1.0))


def classify_segment(points, limb_margin_deg: float = 10.0) -> str:
    """``partial`` if any contour point comes within ``limb_margin_deg`` of the limb."""
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(p) < 3:
        raise DegenerateContourError("need at least 3 contour points")
    limit = math.radians(90.0 - limb_margin_deg)
    return "partial" if np.any(polar_angle(p) > limit) else "full"


@dataclass(frozen=True, eq=False)
class SegmentCorrection:
    direction: np.ndarray
    corrected: bool
    alpha: float = math.pi
    shift: float = 0.0  # m, along the ball surface
    warning: Optional[str] = None


def segment_correct(
    points,
    centroid,
    logo_radius: float = 0.0065,
    ball_radius: float = 0.02,
    full_visibility: bool = False,
    limb_margin_deg: float = 10.0,
) -> SegmentCorrection:
    """Move the centroid of a limb-cut logo to the centre of the full logo circle.

    The visible area is estimated as ``pi * dbar**2`` where ``dbar`` is the
    mean tangent-plane distance of the contour to the centroid. Inverting the
    segment-area formula gives the half-angle, from which the centroid offset
    follows. The centroid is then rotated along the sphere towards the limb by
    that offset. Areas outside ``(0, pi r^2]`` leave the centroid unchanged
    and set ``warning``.
    """
    if not logo_radius < ball_radius:
        raise ValueError("logo must be smaller than the ball")
    c = np.asarray(centroid, dtype=float)
    c = c / np.linalg.norm(c)
    if full_visibility:
        return SegmentCorrection(c, False)
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    tangent = p - np.outer(p @ c, c)
    dbar = float(np.mean(np.linalg.norm(tangent, axis=1))) * ball_radius
    area = math.pi * dbar**2
    if not 0 < area <= math.pi * logo_radius**2:
        return SegmentCorrection(c, False, warning=f"segment area {area:.3g} m^2 outside (0, pi r^2]")
    alpha = segment_half_angle(area, logo_radius)
    shift = segment_centroid_distance(alpha, logo_radius)
    toward = _limb_direction(p, c, limb_margin_deg)
    if toward is None:
        return SegmentCorrection(c, False, alpha, warning="centroid at the pole, no limb direction")
    beta = shift / ball_radius
    d = math.cos(beta) * c + math.sin(beta) * toward
    return SegmentCorrection(d / np.linalg.norm(d), True, alpha, shift)


def _limb_direction(points: np.ndarray, c: np.ndarray, limb_margin_deg: float) -> Optional[np.ndarray]:
    """Unit tangent at ``c`` pointing to the middle of the limb-side contour."""
    near = points[polar_angle(points) > math.radians(90.0 - limb_margin_deg)]
    target = near.mean(axis=0) if len(near) else np.array([c[0], c[1], 0.0])
    u = target - np.dot(target, c) * c
    n = np.linalg.norm(u)
    if n < 1e-12:
        # fall back to the direction of increasing polar angle
        u = c[2] * c - np.array([0.0, 0.0, 1.0])
        n = np.linalg.norm(u)
        if n < 1e-12:
            return None
    return u / n


def logo_center(pixels, radius_px: float, cfg: LogoConfig = LogoConfig()) -> SegmentCorrection:
    pts = project_contour(pixels, radius_px)
    c = contour_centroid(pts)
    full = not cfg.segment_fit or classify_segment(pts, cfg.limb_margin_deg) == "full"
    out = segment_correct(pts, c, cfg.logo_radius, cfg.ball_radius, full, cfg.limb_margin_deg)
    if out.warning:
        warnings.warn(out.warning, RuntimeWarning, stacklevel=2)
    return out


def track_from_contours(frames: Sequence[ContourFrame], cfg: LogoConfig = LogoConfig()) -> LogoTrack:
    """Logo track from per-frame contours; frames with fewer than 3 pixels count as hidden."""
    t, dirs, vis = [], [], []
    for f in frames:
        t.append(f.t)
        px = np.asarray(f.pixels, dtype=float).reshape(-1, 2)
        if len(px) < 3:
            dirs.append(np.zeros(3))
            vis.append(False)
            continue
        dirs.append(logo_center(px, f.radius_px, cfg).direction)
        vis.append(True)
    return LogoTrack(np.array(t), np.array(dirs).reshape(-1, 3), np.array(vis))


def track_from_poses(t, poses: Sequence[Optional[Quat]]) -> LogoTrack:
    """Logo track from externally predicted ball orientations (``None`` = not visible)."""
    dirs = np.array([logo_direction(q) if q is not None else np.zeros(3) for q in poses]).reshape(-1, 3)
    return LogoTrack(np.asarray(t, dtype=float), dirs, np.array([q is not None for q in poses]))


# --- rotation fit -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RotationPlane:
    normal: np.ndarray
    offset: float

    @property
    def circle_radius(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.offset**2))


def _orthonormal(n: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    helper = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(n, helper)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(n, e1)


def fit_plane(directions, weight: float = 1.0) -> RotationPlane:
    """Plane ``n . p = d`` through logo centres on the unit sphere.

    Minimises the squared point-plane distance plus ``weight`` times the
    squared distance to the circle the plane cuts from the sphere. Starts
    from the total-least-squares plane.
    """
    p = np.asarray(directions, dtype=float).reshape(-1, 3)
    if len(p) < 3:
        raise InsufficientVisibilityError(f"plane fit needs 3 visible logos, got {len(p)}")
    m = p.mean(axis=0)
    mdir = m / np.linalg.norm(m) if np.linalg.norm(m) > 1e-12 else p[0]
    spread = np.arccos(np.clip(p @ mdir, -1.0, 1.0)).max()
    if spread < math.radians(0.5):
        raise SpinAxisIndeterminateError("logo positions barely move; spin axis is indeterminate")
    _, sv, vt = np.linalg.svd(p - m)
    if sv[1] < 1e-9 * sv[0]:
        raise SpinAxisIndeterminateError("logo positions are collinear")
    n0 = vt[2]
    d0 = float(n0 @ m)
    e1, e2 = _orthonormal(n0)
    sw = math.sqrt(weight)

    def unpack(x):
        n = n0 + x[0] * e1 + x[1] * e2
        return n / np.linalg.norm(n), x[2]

    def residuals(x):
        n, d = unpack(x)
        plane = p @ n - d
        circle = np.linalg.norm(p - d * n, axis=1) - math.sqrt(max(0.0, 1.0 - d * d))
        return np.concatenate([plane, sw * circle])

    lim = 1.0 - 1e-12
    res = least_squares(
        residuals,
        np.array([0.0, 0.0, np.clip(d0, -lim + 1e-9, lim - 1e-9)]),
        bounds=([-np.inf, -np.inf, -lim], [np.inf, np.inf, lim]),
        xtol=1e-14,
        ftol=1e-14,
        gtol=1e-14,
    )
    n, d = unpack(res.x)
    if d < 0:
        n, d = -n, -d
    return RotationPlane(n, float(d))


@dataclass(frozen=True, eq=False)
class AngleTrack:
    t: np.ndarray
    accumulated: np.ndarray  # degrees
    slope: float  # deg/s
    rms: float  # degrees


def _wrap180(a: float) -> float:
    a = math.fmod(a + 180.0, 360.0)
    if a <= 0:
        a += 360.0
    return a - 180.0


def angular_velocity(
    track: LogoTrack,
    plane: RotationPlane,
    min_delta_deg: float = 0.05,
    unwrap: str = "rate",
) -> Tuple[AngleTrack, SpinEstimate]:
    """Spin from the in-plane angle of visible logo positions.

    Consecutive visible frames give a wrapped angle step. A gap of two or
    more hidden frames means the logo went round the back, so the long way
    round (360 deg minus the short angle) is taken. With ``unwrap="rate"``
    (default) the angular rate seen between directly adjacent frames is used
    instead when available: every step becomes the representative closest to
    that rate's prediction, which agrees with the long-angle rule on
    hidden-hemisphere gaps but also copes with random dropouts and gaps of
    more than one revolution. ``unwrap="half_revolution"`` applies the
    long-angle rule alone.
    """
    if unwrap not in ("rate", "half_revolution"):
        raise ValueError(f"unknown unwrap mode {unwrap!r}")
    vis = np.nonzero(track.visible)[0]
    if len(vis) < 2:
        raise InsufficientVisibilityError("need at least 2 visible logo positions")
    n = plane.normal
    p = track.directions[vis]
    q = p - np.outer(p @ n, n)
    ref = q[np.argmax(np.linalg.norm(q, axis=1))]
    if np.linalg.norm(ref) < 1e-12:
        e1, e2 = _orthonormal(n)
    else:
        e1 = ref / np.linalg.norm(ref)
        e2 = np.cross(n, e1)
    theta = np.degrees(np.arctan2(q @ e2, q @ e1))
    t = track.t[vis]
    gaps = np.diff(vis) - 1
    dts = np.diff(t)
    wrapped = np.array([_wrap180(b - a) for a, b in zip(theta[:-1], theta[1:])])

    rate = None  # deg/s
    if unwrap == "rate" and np.any(gaps == 0):
        rate = float(np.median(wrapped[gaps == 0] / dts[gaps == 0]))
    acc = [0.0]
    aliased = False
    for delta, gap, dt in zip(wrapped, gaps, dts):
        if rate is not None:
            delta += 360.0 * round((rate * dt - delta) / 360.0)
        elif gap >= 2 and delta != 0.0:
            delta -= math.copysign(360.0, delta)
        if abs(delta) > 360.0:
            aliased = True
        acc.append(acc[-1] + delta)
        if unwrap == "rate" and rate is None:
            rate = delta / dt
    acc = np.array(acc)
    steps = np.abs(np.diff(acc))

    A = np.column_stack([t - t.mean(), np.ones_like(t)])
    cond = float(np.linalg.cond(A))
    if np.all(steps < min_delta_deg):
        slope, rms = 0.0, float(np.sqrt(np.mean((acc - acc.mean()) ** 2)))
        est = SpinEstimate(np.zeros(3), rms, cond, len(vis), "logo_bg", low_confidence=True)
        return AngleTrack(t, acc, slope, rms), est
    coef, *_ = np.linalg.lstsq(A, acc, rcond=None)
    slope = float(coef[0])
    rms = float(np.sqrt(np.mean((A @ coef - acc) ** 2)))
    low = aliased
    est = SpinEstimate(math.radians(slope) * n, rms, cond, len(vis), "logo_bg", low_confidence=low)
    return AngleTrack(t, acc, slope, rms), est


def estimate_spin_logo(
    frames: Union[LogoTrack, Sequence[ContourFrame]],
    cfg: LogoConfig = LogoConfig(),
    method: str = "logo_bg",
) -> SpinEstimate:
    """Full logo pipeline; accepts a ``LogoTrack`` or raw per-frame contours."""
    track = frames if isinstance(frames, LogoTrack) else track_from_contours(frames, cfg)
    n_vis = int(track.visible.sum())
    if n_vis < 3:
        raise InsufficientVisibilityError(f"need at least 3 visible logos, got {n_vis}")
    plane = fit_plane(track.directions[track.visible], cfg.plane_weight)
    _, est = angular_velocity(track, plane)
    low = est.low_confidence or plane.circle_radius < cfg.min_circle_radius
    return SpinEstimate(est.omega, est.rms_residual, est.condition_number, est.n_points, method, low)
