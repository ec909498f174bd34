"""Spin from the ball trajectory.

A cubic per axis smooths the observed positions; its first and second
derivatives replace velocity and acceleration in the flight model, which is
then linear in the spin vector::

    k_M * (omega x v) = a + k_D |v| v + (0, 0, g)

Stacking that for every sample time gives an overdetermined ``M omega = b``.
The drag rows are orthogonal to the column space of ``M`` (``[v]_x v = 0``),
so the solution does not depend on ``k_D``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .physics import (
    MAX_SPIN,
    BallState,
    BouncePoint,
    PhysicalConstants,
    Trajectory,
    bounce_point,
    integrate,
)

MAX_CONDITION = 1e8
MIN_VELOCITY_SPREAD = math.radians(0.1)


class EstimationError(RuntimeError):
    code = "estimation-error"


class InsufficientDataError(EstimationError):
    code = "insufficient-data"


class DegenerateGeometryError(EstimationError):
    code = "degenerate-geometry"


class RankDeficientError(EstimationError):
    code = "rank-deficient"


class ImplausibleSpinError(EstimationError):
    code = "implausible-spin"


@dataclass(frozen=True, eq=False)
class SpinEstimate:
    omega: np.ndarray  # rad/s
    rms_residual: float
    condition_number: float
    n_points: int
    method: str
    low_confidence: bool = False

    def to_dict(self) -> dict:
        return {
            "omega": [float(v) for v in self.omega],
            "rms_residual": float(self.rms_residual),
            "condition_number": float(self.condition_number),
            "n_points": int(self.n_points),
            "method": self.method,
            "low_confidence": bool(self.low_confidence),
        }


@dataclass(frozen=True, eq=False)
class PolyFit3:
    """Per-axis cubic in centred time ``tau = t - t0``.

    ``coeffs[axis]`` holds ``(c0, c1, c2, c3)`` for ``c0 + c1 tau + c2 tau^2 + c3 tau^3``.
    """

    coeffs: np.ndarray
    t0: float
    t_start: float
    t_end: float
    rms_residual: float

    def position(self, t) -> np.ndarray:
        tau = np.atleast_1d(np.asarray(t, dtype=float) - self.t0)[:, None]
        c = self.coeffs
        p = c[:, 0] + tau * (c[:, 1] + tau * (c[:, 2] + tau * c[:, 3]))
        return p.reshape(np.shape(t) + (3,))

    def velocity(self, t) -> np.ndarray:
        tau = np.atleast_1d(np.asarray(t, dtype=float) - self.t0)[:, None]
        c = self.coeffs
        v = c[:, 1] + 2 * c[:, 2] * tau + 3 * c[:, 3] * tau**2
        return v.reshape(np.shape(t) + (3,))

    def acceleration(self, t) -> np.ndarray:
        tau = np.atleast_1d(np.asarray(t, dtype=float) - self.t0)[:, None]
        c = self.coeffs
        a = 2 * c[:, 2] + 6 * c[:, 3] * tau
        return a.reshape(np.shape(t) + (3,))


def _window_slice(n: int, window) -> slice:
    if window is None:
        return slice(0, n)
    if isinstance(window, slice):
        return slice(*window.indices(n))
    start, stop = window
    return slice(*slice(start, stop).indices(n))


def fit_polynomial(traj: Trajectory, window: Union[slice, tuple, None] = None) -> PolyFit3:
    """Least-squares cubic per axis over ``traj[window]``.

    Time is centred on the window midpoint and scaled by its half-width before
    solving; the stored coefficients are in plain (centred) seconds.
    """
    sl = _window_slice(len(traj), window)
    t = traj.t[sl]
    p = traj.positions[sl]
    if len(t) < 5:
        raise InsufficientDataError(f"cubic fit needs at least 5 points, got {len(t)}")
    t0 = 0.5 * (t[0] + t[-1])
    h = 0.5 * (t[-1] - t[0])
    if not h > 0:
        raise RankDeficientError("fit window has zero time span")
    s = (t - t0) / h
    V = np.vander(s, 4, increasing=True)
    coef_s, _, rank, sv = np.linalg.lstsq(V, p, rcond=None)
    if rank < 4 or sv[-1] < 1e-10 * sv[0]:
        raise RankDeficientError("polynomial design matrix is rank deficient (duplicate timestamps?)")
    resid = p - V @ coef_s
    rms = float(np.sqrt(np.mean(np.sum(resid**2, axis=1))))
    coeffs = (coef_s / (h ** np.arange(4))[:, None]).T
    return PolyFit3(coeffs, float(t0), float(t[0]), float(t[-1]), rms)


def _skew(v: np.ndarray) -> np.ndarray:
    """Batch cross-product matrices: ``_skew(v) @ w == cross(v, w)``."""
    z = np.zeros(len(v))
    return np.stack(
        [
            np.stack([z, -v[:, 2], v[:, 1]], axis=1),
            np.stack([v[:, 2], z, -v[:, 0]], axis=1),
            np.stack([-v[:, 1], v[:, 0], z], axis=1),
        ],
        axis=1,
    )


def magnus_system(fit: PolyFit3, sample_times: Sequence[float], c: PhysicalConstants):
    """Stacked ``(M, b)`` with ``M`` of shape ``(3n, 3)``."""
    t = np.asarray(sample_times, dtype=float)
    v = fit.velocity(t)
    a = fit.acceleration(t)
    speed = np.linalg.norm(v, axis=1, keepdims=True)
    M = (-c.k_m * _skew(v)).reshape(-1, 3)
    b = a + c.k_d * speed * v
    b[:, 2] += c.g
    return M, b.reshape(-1)


def solve_spin(fit: PolyFit3, sample_times: Sequence[float], c: PhysicalConstants) -> SpinEstimate:
    t = np.asarray(sample_times, dtype=float)
    if len(t) < 3:
        raise InsufficientDataError("need at least 3 sample times")
    v = fit.velocity(t)
    u = v / np.linalg.norm(v, axis=1, keepdims=True)
    spread = max(math.atan2(np.linalg.norm(np.cross(u[i], u[j])), np.dot(u[i], u[j])) for i, j in [(0, -1), (0, len(u) // 2), (len(u) // 2, -1)])
    if spread <= MIN_VELOCITY_SPREAD:
        raise DegenerateGeometryError("velocity direction is nearly constant; spin along it is unobservable")
    M, b = magnus_system(fit, t, c)
    cond = float(np.linalg.cond(M))
    if not cond <= MAX_CONDITION:
        raise DegenerateGeometryError(f"Magnus system condition number {cond:.3g} exceeds {MAX_CONDITION:.0e}")
    Q, R = np.linalg.qr(M)
    omega = np.linalg.solve(R, Q.T @ b)
    if np.linalg.norm(omega) > MAX_SPIN:
        raise ImplausibleSpinError(f"|omega| = {np.linalg.norm(omega):.0f} rad/s exceeds {MAX_SPIN:.0f} rad/s")
    resid = (M @ omega - b).reshape(-1, 3)
    rms = float(np.sqrt(np.mean(np.sum(resid**2, axis=1))))
    return SpinEstimate(omega, rms, cond, len(t), "trajectory")


def _extrapolation_gain(t_window: np.ndarray, t_cand: float) -> float:
    """Noise gain of a cubic fit on ``t_window`` extrapolated to ``t_cand``, candidate noise included."""
    t0 = 0.5 * (t_window[0] + t_window[-1])
    h = 0.5 * (t_window[-1] - t_window[0])
    V = np.vander((t_window - t0) / h, 4, increasing=True)
    row = np.vander([(t_cand - t0) / h], 4, increasing=True)
    w = row @ np.linalg.pinv(V)
    return float(np.sqrt(1.0 + np.sum(w**2)))


# one-step-back gain for 5 equally spaced samples
_UNIT_GAIN = _extrapolation_gain(np.arange(5.0), -1.0)


def filter_outliers(traj: Trajectory, threshold: float = 0.05, head_len: int = 20) -> Trajectory:
    """Drop spurious detections at the start of a trajectory.

    Starting from the last 5 of the first ``head_len`` observations, each
    earlier observation is checked against a cubic through the 5 nearest
    accepted points and dropped if it lies more than ``threshold`` from the
    extrapolated position; otherwise it joins the window. ``threshold`` is
    stated for a candidate one sample step before an evenly spaced window.
    After a rejection the next candidate is further out, so its distance is
    scaled down by the larger extrapolation noise gain.

    Short trajectories are scanned in full.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    n = len(traj)
    if n < 5:
        raise InsufficientDataError(f"need at least 5 observations, got {n}")
    head = head_len if n >= head_len + 5 else n
    accepted = list(range(head - 5, head))
    rejected = []
    for cand in range(head - 6, -1, -1):
        win = np.array(accepted[:5])
        fit = fit_polynomial(traj[win])
        err = np.linalg.norm(fit.position(traj.t[cand]) - traj.positions[cand])
        err *= _UNIT_GAIN / _extrapolation_gain(traj.t[win], traj.t[cand])
        if err > threshold:
            rejected.append(cand)
        else:
            accepted.insert(0, cand)
    if not rejected:
        return traj
    keep = np.ones(n, dtype=bool)
    keep[rejected] = False
    if keep.sum() < 5:
        raise InsufficientDataError("fewer than 5 inliers remain after outlier filtering")
    return traj[keep]


@dataclass(frozen=True)
class EstimatorConfig:
    window: int = 80  # most recent observations fed to the spin fit
    predict_window: int = 45  # observations behind the end state used for prediction
    threshold: float = 0.05  # outlier distance, m
    head_len: int = 20
    min_points: int = 10


def estimate_spin(traj: Trajectory, c: PhysicalConstants, cfg: EstimatorConfig = EstimatorConfig()) -> SpinEstimate:
    if len(traj) < cfg.min_points:
        raise InsufficientDataError(f"need at least {cfg.min_points} observations, got {len(traj)}")
    clean = filter_outliers(traj, cfg.threshold, cfg.head_len)
    n = len(clean)
    if n < cfg.min_points:
        raise InsufficientDataError(f"only {n} observations left after outlier filtering")
    sl = slice(n - min(n, cfg.window), n)
    fit = fit_polynomial(clean, sl)
    return solve_spin(fit, clean.t[sl], c)


def predict_bounce(
    traj_prefix: Trajectory,
    spin: Optional[Sequence[float]],
    c: PhysicalConstants,
    window: int = 45,
    dt: float = 1e-3,
    horizon: float = 2.0,
) -> BouncePoint:
    """Bounce point from the polynomial end state of ``traj_prefix``.

    ``spin=None`` integrates without Magnus force (the no-spin baseline).
    Raises ``NoBounceError`` if the ball does not land within ``horizon``.
    """
    n = len(traj_prefix)
    fit = fit_polynomial(traj_prefix, slice(n - min(n, window), n))
    t_n = float(traj_prefix.t[-1])
    state = BallState(t_n, fit.position(t_n), fit.velocity(t_n))
    w = np.zeros(3) if spin is None else np.asarray(spin, dtype=float)
    flight = integrate(state, w, c, dt, t_n + horizon, stop_at_bounce=True)
    return bounce_point(flight)


def first_flight_segment(traj: Trajectory, radius: float = 0.02, contact_margin: float = 0.03, rise: float = 0.01) -> Trajectory:
    """Observations strictly before the first bounce.

    A bounce is a local minimum of z within ``contact_margin`` of the table
    contact height ``radius`` that is followed by a rise of at least ``rise``
    within the next three samples. The minimum sample itself is dropped since
    it may lie on either side of contact. Without a bounce the input is
    returned unchanged.
    """
    z = traj.positions[:, 2]
    n = len(z)
    for k in range(1, n - 1):
        if z[k] > radius + contact_margin or z[k] > z[k - 1] or z[k] >= z[k + 1]:
            continue
        if np.max(z[k + 1 : k + 4]) - z[k] >= rise:
            return traj[np.arange(k)]
    return traj
