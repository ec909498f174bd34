"""Ball flight model: drag + Magnus + gravity, RK4 integration, bounce detection.

Table frame: origin at the centre of the table surface, x along the table
towards the robot, y across, z up. The ball touches the table when its centre
is one radius above the surface.

The same module holds the synthetic-data oracles (noisy trajectory samples,
logo tracks, logo contours) that the estimators are tested against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .rotmath import Quat, quat_to_matrix

MAX_SPEED = 60.0  # m/s
MAX_SPIN = 1400.0  # rad/s
DEFAULT_VISIBILITY_THRESHOLD = 0.17


class NoBounceError(RuntimeError):
    """The ball does not reach the table within the integration horizon."""


@dataclass(frozen=True)
class PhysicalConstants:
    mass: float = 0.0027  # kg
    radius: float = 0.02  # m
    g: float = 9.81  # m/s^2
    c_d: float = 0.4
    c_m: float = 0.6
    rho_a: float = 1.29  # kg/m^3

    def __post_init__(self):
        for name in ("mass", "radius", "g", "rho_a"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        # zero drag / lift are allowed so the model can reduce to plain ballistics
        for name in ("c_d", "c_m"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def area(self) -> float:
        return self.radius**2 * math.pi

    @property
    def k_d(self) -> float:
        return 0.5 * self.c_d * self.rho_a * self.area / self.mass

    @property
    def k_m(self) -> float:
        return 0.5 * self.c_m * self.rho_a * self.area * self.radius / self.mass

    def replace(self, **changes) -> "PhysicalConstants":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class BallState:
    t: float
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        p = np.array(self.position, dtype=float).reshape(3)
        v = np.array(self.velocity, dtype=float).reshape(3)
        if not math.isfinite(self.t) or not np.all(np.isfinite(p)) or not np.all(np.isfinite(v)):
            raise ValueError("ball state must be finite")
        if np.linalg.norm(v) >= MAX_SPEED:
            raise ValueError(f"|velocity| must be below {MAX_SPEED} m/s")
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "velocity", v)


def check_spin(omega) -> np.ndarray:
    w = np.array(omega, dtype=float).reshape(3)
    if not np.all(np.isfinite(w)) or np.linalg.norm(w) > MAX_SPIN:
        raise ValueError(f"spin must be finite with |omega| <= {MAX_SPIN} rad/s")
    return w


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Timestamped ball positions, strictly increasing in time."""

    t: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        t = np.array(self.t, dtype=float).reshape(-1)
        p = np.array(self.positions, dtype=float).reshape(-1, 3)
        if len(t) != len(p):
            raise ValueError("times and positions differ in length")
        if len(t) < 2:
            raise ValueError("a trajectory needs at least 2 samples")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(p))):
            raise ValueError("trajectory contains non-finite values")
        if np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "positions", p)

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, idx) -> "Trajectory":
        if isinstance(idx, (int, np.integer)):
            raise TypeError("index a trajectory with a slice or an index array")
        return Trajectory(self.t[idx], self.positions[idx])

    def shifted(self, offset) -> "Trajectory":
        return Trajectory(self.t, self.positions + np.asarray(offset, dtype=float))

    def before(self, t_cut: float) -> "Trajectory":
        return self[self.t < t_cut]


@dataclass(frozen=True, eq=False)
class Flight:
    """Dense integrator output; keeps the model so events can be refined."""

    t: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    spin: np.ndarray
    constants: PhysicalConstants
    dt: float

    def __len__(self) -> int:
        return len(self.t)

    @property
    def trajectory(self) -> Trajectory:
        return Trajectory(self.t, self.positions)

    def state(self, i: int) -> BallState:
        return BallState(self.t[i], self.positions[i], self.velocities[i])


@dataclass(frozen=True, eq=False)
class BouncePoint:
    position: np.ndarray
    time: float


def acceleration(velocity, spin, c: PhysicalConstants) -> np.ndarray:
    """Drag + Magnus + gravity for one velocity ``(3,)`` or a batch ``(n, 3)``."""
    v = np.asarray(velocity, dtype=float)
    w = np.asarray(spin, dtype=float)
    speed = np.linalg.norm(v, axis=-1, keepdims=True)
    a = -c.k_d * speed * v + c.k_m * np.cross(w, v)
    a[..., 2] -= c.g
    return a


def _deriv(s, w, kd, km, g):
    # s = (x, y, z, vx, vy, vz); plain floats keep the RK4 loop cheap
    vx, vy, vz = s[3], s[4], s[5]
    sp = math.sqrt(vx * vx + vy * vy + vz * vz)
    wx, wy, wz = w
    return (
        vx,
        vy,
        vz,
        -kd * sp * vx + km * (wy * vz - wz * vy),
        -kd * sp * vy + km * (wz * vx - wx * vz),
        -kd * sp * vz + km * (wx * vy - wy * vx) - g,
    )


def _rk4_step(s, h, w, kd, km, g):
    k1 = _deriv(s, w, kd, km, g)
    s2 = tuple(a + 0.5 * h * b for a, b in zip(s, k1))
    k2 = _deriv(s2, w, kd, km, g)
    s3 = tuple(a + 0.5 * h * b for a, b in zip(s, k2))
    k3 = _deriv(s3, w, kd, km, g)
    s4 = tuple(a + h * b for a, b in zip(s, k3))
    k4 = _deriv(s4, w, kd, km, g)
    return tuple(a + h / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(s, k1, k2, k3, k4))


def integrate(
    initial: BallState,
    spin,
    c: PhysicalConstants,
    dt: float = 1e-3,
    t_end: float = 1.0,
    stop_at_bounce: bool = False,
) -> Flight:
    """Fixed-step RK4 from ``initial.t`` to ``t_end``.

    Samples are spaced ``dt`` apart; a shorter final step lands exactly on
    ``t_end``. With ``stop_at_bounce`` the run ends on the first step that
    brings the ball centre down to table contact height.
    """
    if not (0 < dt <= 0.01):
        raise ValueError("dt must lie in (0, 0.01] s")
    if not t_end > initial.t:
        raise ValueError("t_end must be after the initial time")
    w = tuple(check_spin(spin))
    kd, km, g, r = c.k_d, c.k_m, c.g, c.radius
    n_full = int(math.floor((t_end - initial.t) / dt + 1e-9))
    times = [initial.t + k * dt for k in range(n_full + 1)]
    if t_end - times[-1] > 1e-12:
        times.append(t_end)
    s = (*initial.position, *initial.velocity)
    states = [s]
    for k in range(1, len(times)):
        s = _rk4_step(s, times[k] - times[k - 1], w, kd, km, g)
        states.append(s)
        if stop_at_bounce and s[2] <= r < states[-2][2]:
            break
    arr = np.array(states)
    return Flight(np.array(times[: len(arr)]), arr[:, :3], arr[:, 3:], np.array(w), c, dt)


def bounce_point(flight: Flight, tol: float = 1e-9) -> BouncePoint:
    """First descent of the ball centre through ``z = radius``, refined by bisection."""
    r = flight.constants.radius
    z = flight.positions[:, 2]
    hits = np.nonzero((z[:-1] > r) & (z[1:] <= r))[0]
    if hits.size == 0:
        raise NoBounceError("ball does not reach the table within the integrated horizon")
    k = int(hits[0])
    c = flight.constants
    w = tuple(flight.spin)
    s0 = (*flight.positions[k], *flight.velocities[k])
    lo, hi = 0.0, float(flight.t[k + 1] - flight.t[k])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _rk4_step(s0, mid, w, c.k_d, c.k_m, c.g)[2] > r:
            lo = mid
        else:
            hi = mid
    s = _rk4_step(s0, hi, w, c.k_d, c.k_m, c.g)
    return BouncePoint(np.array(s[:3]), float(flight.t[k] + hi))


def _substeps(rate: float, max_dt: float = 1e-3) -> int:
    return max(1, math.ceil((1.0 / rate) / max_dt - 1e-9))


def simulate_flight(
    initial: BallState,
    spin,
    c: PhysicalConstants,
    rate: float,
    duration: Optional[float] = None,
    horizon: float = 2.0,
) -> Flight:
    """Integrate on a grid that contains every camera sample time."""
    dt = 1.0 / (rate * _substeps(rate))
    if duration is None:
        return integrate(initial, spin, c, dt, initial.t + horizon, stop_at_bounce=True)
    return integrate(initial, spin, c, dt, initial.t + duration)


def simulate_observations(
    initial: BallState,
    spin,
    c: PhysicalConstants,
    rate: float = 150.0,
    noise_sigma: float = 0.002,
    seed: int = 0,
    duration: Optional[float] = None,
    horizon: float = 2.0,
) -> Trajectory:
    """Camera samples of a simulated flight with isotropic Gaussian noise.

    Without ``duration`` the samples cover the flight up to (excluding) the
    first bounce, or ``horizon`` seconds if the ball never lands.
    """
    if not (50 <= rate <= 500):
        raise ValueError("rate must lie in [50, 500] Hz")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    flight = simulate_flight(initial, spin, c, rate, duration, horizon)
    k = _substeps(rate)
    t = flight.t[::k]
    pos = flight.positions[::k].copy()
    if duration is None:
        try:
            keep = t < bounce_point(flight).time
        except NoBounceError:
            keep = np.ones(len(t), dtype=bool)
        t, pos = t[keep], pos[keep]
    rng = np.random.default_rng(seed)
    pos += rng.normal(0.0, noise_sigma, size=pos.shape) if noise_sigma > 0 else 0.0
    return Trajectory(t, pos)


@dataclass(frozen=True, eq=False)
class LogoTrack:
    """Per-frame logo centre directions in the camera-aligned ball frame.

    z points towards the camera (the ceiling camera looks down, so this frame
    shares its axes with the table frame). Hidden frames carry a zero vector.
    """

    t: np.ndarray
    directions: np.ndarray
    visible: np.ndarray

    def __post_init__(self):
        t = np.array(self.t, dtype=float).reshape(-1)
        d = np.array(self.directions, dtype=float).reshape(-1, 3)
        vis = np.array(self.visible, dtype=bool).reshape(-1)
        if not (len(t) == len(d) == len(vis)):
            raise ValueError("logo track fields differ in length")
        if len(t) and np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if vis.any() and np.max(np.abs(np.linalg.norm(d[vis], axis=1) - 1)) > 1e-9:
            raise ValueError("visible logo directions must be unit vectors")
        d = np.where(vis[:, None], d, 0.0)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "directions", d)
        object.__setattr__(self, "visible", vis)

    def __len__(self) -> int:
        return len(self.t)


def logo_orientations(initial_orientation: Quat, spin, times) -> list:
    """Ball orientation at each time for constant world-frame angular velocity."""
    w = check_spin(spin)
    return [Quat.from_rotvec(w * float(t)) * initial_orientation for t in times]


def simulate_logo(
    initial_orientation: Quat,
    spin,
    rate: float = 380.0,
    t_end: float = 0.08,
    miss_prob: float = 0.0,
    seed: int = 0,
    visibility_threshold: float = DEFAULT_VISIBILITY_THRESHOLD,
) -> LogoTrack:
    """Logo centre seen by a camera on +z, frames at ``k / rate`` for ``0 <= t <= t_end``."""
    if not (50 <= rate <= 500):
        raise ValueError("rate must lie in [50, 500] Hz")
    if not (0 <= miss_prob < 1):
        raise ValueError("miss_prob must lie in [0, 1)")
    n = int(math.floor(t_end * rate + 1e-9)) + 1
    t = np.arange(n) / rate
    dirs = np.array([quat_to_matrix(q).matrix[:, 2] for q in logo_orientations(initial_orientation, spin, t)])
    rng = np.random.default_rng(seed)
    detected = rng.random(n) >= miss_prob
    visible = (dirs[:, 2] > visibility_threshold) & detected
    return LogoTrack(t, dirs, visible)


def _tangent_basis(d: np.ndarray):
    helper = np.array([1.0, 0.0, 0.0]) if abs(d[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(d, helper)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(d, e1)


def logo_contour(direction, angular_radius: float, n_points: int = 64, limb_points: int = 16) -> np.ndarray:
    """3D contour of a circular logo centred on ``direction``, as seen from +z.

    Returns unit vectors with ``z >= 0``. When the logo crosses the limb, the
    visible outline is closed by points along the limb inside the logo.
    """
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    e1, e2 = _tangent_basis(d)
    phi = np.linspace(0.0, 2 * np.pi, n_points, endpoint=False)
    ring = math.cos(angular_radius) * d + math.sin(angular_radius) * (
        np.outer(np.cos(phi), e1) + np.outer(np.sin(phi), e2)
    )
    pts = ring[ring[:, 2] >= 0]
    if len(pts) < n_points:
        # limb arc inside the logo cap: (cos a, sin a, 0) . d >= cos(radius)
        horiz = math.hypot(d[0], d[1])
        if horiz > 1e-12:
            half = math.acos(np.clip(math.cos(angular_radius) / horiz, -1.0, 1.0))
            az = math.atan2(d[1], d[0])
            a = az + np.linspace(-half, half, limb_points)
            limb = np.column_stack([np.cos(a), np.sin(a), np.zeros_like(a)])
            pts = np.vstack([pts, limb])
    return pts


def contour_pixels(points: np.ndarray, radius_px: float) -> np.ndarray:
    """Image offsets ``(u, v)`` from the ball centre for sphere points facing the camera."""
    return np.asarray(points)[:, :2] * radius_px


def simulate_contours(
    track: LogoTrack,
    radius_px: float = 35.0,
    angular_radius: float = math.asin(0.0065 / 0.02),
    n_points: int = 64,
) -> list:
    """Contour pixel sets for every visible frame of ``track`` (``None`` for hidden ones)."""
    out = []
    for d, vis in zip(track.directions, track.visible):
        out.append(contour_pixels(logo_contour(d, angular_radius, n_points), radius_px) if vis else None)
    return out
