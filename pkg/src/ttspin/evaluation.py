"""Synthetic experiments: bounce-prediction error table, spin-type clustering, bat pitch.

The spin catalog is synthetic. A throwing machine couples spin and speed, so
the catalog does too (4/5/6 m/s for low/medium/high). Every launch is tuned to
clear the net and land on the robot half of the table.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from . import physics
from .magnus_fit import EstimationError, EstimatorConfig, SpinEstimate, estimate_spin, predict_bounce
from .physics import BallState, NoBounceError, PhysicalConstants

TABLE_HALF_LENGTH = 1.37
TABLE_HALF_WIDTH = 0.7625
NET_HEIGHT = 0.1525

SPIN_TYPES = ("backspin", "sidespin", "topspin")
LEVELS = ("low", "medium", "high")
SPIN_MAGNITUDE = {"low": 60.0, "medium": 180.0, "high": 360.0}  # rad/s
LAUNCH_SPEED = {"low": 4.0, "medium": 5.0, "high": 6.0}  # m/s, horizontal
LAUNCH_POSITION = (-1.8, 0.0, 0.35)
SIDESPIN_Y0 = -0.35
# vertical launch speed per setting: lands at x ~ 0.75 m on the robot side
LAUNCH_VZ = {
    ("backspin", "low"): 3.22,
    ("backspin", "medium"): 1.56,
    ("backspin", "high"): -0.10,
    ("sidespin", "low"): 3.51,
    ("sidespin", "medium"): 2.61,
    ("sidespin", "high"): 2.15,
    ("topspin", "low"): 3.74,
    ("topspin", "medium"): 3.36,
    ("topspin", "high"): 3.63,
}


@dataclass(frozen=True, eq=False)
class SpinSetting:
    name: str
    omega: np.ndarray
    launch: BallState


def make_settings() -> List[SpinSetting]:
    out = []
    for kind in SPIN_TYPES:
        for level in LEVELS:
            w = SPIN_MAGNITUDE[level]
            omega = {"backspin": (0.0, -w, 0.0), "topspin": (0.0, w, 0.0), "sidespin": (0.0, 0.0, w)}[kind]
            x0, y0, z0 = LAUNCH_POSITION
            if kind == "sidespin":
                y0 = SIDESPIN_Y0
            launch = BallState(0.0, (x0, y0, z0), (LAUNCH_SPEED[level], 0.0, LAUNCH_VZ[(kind, level)]))
            out.append(SpinSetting(f"{kind}/{level}", np.array(omega), launch))
    return out


def settings_by_name() -> Dict[str, SpinSetting]:
    return {s.name: s for s in make_settings()}


@dataclass(frozen=True)
class Jitter:
    """Per-throw machine variability (relative spin/speed, absolute vz and position)."""

    spin_rel: float = 0.05
    speed_rel: float = 0.02
    vz: float = 0.05  # m/s
    position: float = 0.01  # m


@dataclass(frozen=True)
class BenchmarkConfig:
    n_per_setting: int = 50
    noise_sigma: float = 0.002
    rate: float = 150.0
    truncate_fraction: float = 0.6
    seed: int = 0
    jitter: Jitter = Jitter()
    estimator: EstimatorConfig = EstimatorConfig()
    constants: PhysicalConstants = PhysicalConstants()
    jobs: int = 1


def throw_rng(seed: int, setting_index: int, trial: int) -> np.random.Generator:
    # independent of scheduling order
    return np.random.default_rng(np.random.SeedSequence([seed, setting_index, trial]))


def jittered_throw(setting: SpinSetting, rng: np.random.Generator, jitter: Jitter):
    omega = setting.omega * (1.0 + jitter.spin_rel * rng.normal())
    v = setting.launch.velocity.copy()
    v[:2] *= 1.0 + jitter.speed_rel * rng.normal()
    v[2] += jitter.vz * rng.normal()
    p = setting.launch.position + jitter.position * rng.normal(size=3)
    return BallState(setting.launch.t, p, v), omega


def run_trial(setting_index: int, trial: int, cfg: BenchmarkConfig) -> dict:
    """One throw: simulate, estimate spin, predict the bounce with and without spin."""
    setting = make_settings()[setting_index]
    rng = throw_rng(cfg.seed, setting_index, trial)
    launch, omega = jittered_throw(setting, rng, cfg.jitter)
    c = cfg.constants
    flight = physics.simulate_flight(launch, omega, c, cfg.rate)
    truth = physics.bounce_point(flight)
    obs = physics.simulate_observations(
        launch, omega, c, cfg.rate, cfg.noise_sigma, seed=int(rng.integers(2**31))
    )
    rec = {
        "setting": setting.name,
        "trial": trial,
        "omega_true": omega.tolist(),
        "bounce_true": truth.position.tolist(),
        "n_obs": len(obs),
    }
    try:
        rec["omega_full"] = estimate_spin(obs, c, cfg.estimator).omega.tolist()
    except EstimationError as exc:
        rec["omega_full"] = None
        rec["error_full"] = exc.code
    t_cut = launch.t + cfg.truncate_fraction * (truth.time - launch.t)
    prefix = obs.before(t_cut)
    try:
        est = estimate_spin(prefix, c, cfg.estimator)
        fitted = predict_bounce(prefix, est.omega, c, cfg.estimator.predict_window)
        baseline = predict_bounce(prefix, None, c, cfg.estimator.predict_window)
    except (EstimationError, NoBounceError) as exc:
        rec["excluded"] = getattr(exc, "code", "no-bounce")
        return rec
    rec["omega_prefix"] = est.omega.tolist()
    rec["bounce_fitted"] = fitted.position.tolist()
    rec["bounce_nospin"] = baseline.position.tolist()
    rec["err_fitted"] = float(np.linalg.norm(fitted.position[:2] - truth.position[:2]))
    rec["err_nospin"] = float(np.linalg.norm(baseline.position[:2] - truth.position[:2]))
    return rec


def run_trials(cfg: BenchmarkConfig, settings_idx: Optional[Sequence[int]] = None) -> List[dict]:
    idx = range(len(make_settings())) if settings_idx is None else settings_idx
    jobs = [(i, k) for i in idx for k in range(cfg.n_per_setting)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            return list(pool.map(run_trial, *zip(*jobs), [cfg] * len(jobs)))
    return [run_trial(i, k, cfg) for i, k in jobs]


@dataclass
class BounceRow:
    setting: str
    fitted_mean_mm: float
    fitted_std_mm: float
    nospin_mean_mm: float
    nospin_std_mm: float
    n: int
    excluded: int


def bounce_table(records: Sequence[dict]) -> List[BounceRow]:
    rows = []
    for name in dict.fromkeys(r["setting"] for r in records):
        recs = [r for r in records if r["setting"] == name]
        ok = [r for r in recs if "err_fitted" in r]
        f = np.array([r["err_fitted"] for r in ok]) * 1e3
        b = np.array([r["err_nospin"] for r in ok]) * 1e3
        rows.append(
            BounceRow(
                name,
                float(f.mean()) if len(f) else math.nan,
                float(f.std(ddof=1)) if len(f) > 1 else math.nan,
                float(b.mean()) if len(b) else math.nan,
                float(b.std(ddof=1)) if len(b) > 1 else math.nan,
                len(ok),
                len(recs) - len(ok),
            )
        )
    return rows


def bounce_benchmark(cfg: BenchmarkConfig = BenchmarkConfig(), records: Optional[List[dict]] = None) -> List[BounceRow]:
    if cfg.n_per_setting < 2:
        raise ValueError("n_per_setting must be at least 2")
    return bounce_table(run_trials(cfg) if records is None else records)


@dataclass
class ClusterReport:
    accuracy: Dict[str, float]
    total: float
    centers: Dict[str, np.ndarray]
    degenerate: bool
    assignments: Dict[str, List[str]] = field(repr=False, default_factory=dict)


def _as_vector(e) -> np.ndarray:
    return np.asarray(e.omega if isinstance(e, SpinEstimate) else e, dtype=float)


def cluster_classify(estimates: Mapping[str, Sequence]) -> ClusterReport:
    """Nearest-median-centre classification of spin estimates.

    ``estimates`` maps setting name to its spin estimates (``SpinEstimate`` or
    plain 3-vectors). Ties go to the lexicographically first setting name.
    """
    names = sorted(estimates)
    vecs = {n: np.array([_as_vector(e) for e in estimates[n]]).reshape(-1, 3) for n in names}
    for n in names:
        if len(vecs[n]) < 2:
            raise ValueError(f"setting {n!r} needs at least 2 estimates")
    centers = {n: np.median(vecs[n], axis=0) for n in names}
    C = np.array([centers[n] for n in names])
    degenerate = len({tuple(c) for c in C.tolist()}) < len(names)
    accuracy, assignments = {}, {}
    hits = total = 0
    for n in names:
        d = np.linalg.norm(vecs[n][:, None, :] - C[None, :, :], axis=2)
        # argmin returns the first minimum, i.e. the first name in sorted order
        assigned = [names[j] for j in np.argmin(d, axis=1)]
        assignments[n] = assigned
        correct = sum(a == n for a in assigned)
        accuracy[n] = correct / len(assigned)
        hits += correct
        total += len(assigned)
    return ClusterReport(accuracy, hits / total, centers, degenerate, assignments)


def bat_pitch(beta_spin: float) -> float:
    """Racket pitch (deg) for the y-component of the fitted spin (deg/s).

    Linear through -360 deg/s -> -40 deg and +360 deg/s -> +28 deg, held
    constant outside that range.
    """
    return float(np.interp(beta_spin, [-360.0, 360.0], [-40.0, 28.0]))


def bat_pitch_from_spin(omega) -> float:
    return bat_pitch(math.degrees(float(np.asarray(omega)[1])))
