"""Run configuration: one flat ``key = value`` text file, overridable from the command line.

Blank lines and ``#`` comments are ignored. Unknown keys and values that fail a
module's preconditions are rejected at load time::

    # stress run
    noise = 0.05
    rate = 150
    min_cluster_accuracy = 0.85
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping

from .evaluation import BenchmarkConfig, Jitter
from .logo_spin import LogoConfig
from .magnus_fit import EstimatorConfig
from .physics import DEFAULT_VISIBILITY_THRESHOLD, PhysicalConstants


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # physical constants
    mass: float = 0.0027
    radius: float = 0.02
    g: float = 9.81
    c_d: float = 0.4
    c_m: float = 0.6
    rho_a: float = 1.29
    # observation model
    noise: float = 0.002  # m, position noise sigma
    rate: float = 150.0  # Hz, trajectory camera
    logo_rate: float = 380.0  # Hz, logo camera
    logo_frames: int = 30
    logo_visibility: float = DEFAULT_VISIBILITY_THRESHOLD
    miss_prob: float = 0.0
    radius_px: float = 35.0
    # trajectory estimator
    window: int = 80
    predict_window: int = 45
    threshold: float = 0.05
    head_len: int = 20
    min_points: int = 10
    # logo estimator
    logo_radius: float = 0.0065
    limb_margin_deg: float = 10.0
    plane_weight: float = 1.0
    segment_fit: bool = True
    # benchmark
    n_per_setting: int = 50
    truncate_fraction: float = 0.6
    spin_jitter: float = 0.05
    speed_jitter: float = 0.02
    vz_jitter: float = 0.05
    position_jitter: float = 0.01
    min_cluster_accuracy: float = 0.85
    max_topspin_ratio: float = 1.0 / 3.0
    # run
    seed: int = 0
    jobs: int = 1
    out: str = "."

    def __post_init__(self):
        try:
            self.constants()
            self.estimator()
            self.logo()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        checks = [
            (self.noise >= 0, "noise must be non-negative"),
            (50 <= self.rate <= 500, "rate must lie in [50, 500] Hz"),
            (50 <= self.logo_rate <= 500, "logo_rate must lie in [50, 500] Hz"),
            (self.logo_frames >= 3, "logo_frames must be at least 3"),
            (-1 < self.logo_visibility < 1, "logo_visibility must lie in (-1, 1)"),
            (0 <= self.miss_prob < 1, "miss_prob must lie in [0, 1)"),
            (self.radius_px > 0, "radius_px must be positive"),
            (self.window >= 5, "window must be at least 5"),
            (self.predict_window >= 5, "predict_window must be at least 5"),
            (self.threshold > 0, "threshold must be positive"),
            (self.head_len >= 5, "head_len must be at least 5"),
            (self.min_points >= 5, "min_points must be at least 5"),
            (0 < self.logo_radius < self.radius, "logo_radius must lie in (0, radius)"),
            (0 <= self.limb_margin_deg < 90, "limb_margin_deg must lie in [0, 90)"),
            (self.plane_weight >= 0, "plane_weight must be non-negative"),
            (self.n_per_setting >= 2, "n_per_setting must be at least 2"),
            (0 < self.truncate_fraction <= 1, "truncate_fraction must lie in (0, 1]"),
            (min(self.spin_jitter, self.speed_jitter, self.vz_jitter, self.position_jitter) >= 0, "jitter must be non-negative"),
            (0 <= self.min_cluster_accuracy <= 1, "min_cluster_accuracy must lie in [0, 1]"),
            (self.max_topspin_ratio > 0, "max_topspin_ratio must be positive"),
            (self.seed >= 0, "seed must be non-negative"),
            (self.jobs >= 1, "jobs must be at least 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    def constants(self) -> PhysicalConstants:
        return PhysicalConstants(self.mass, self.radius, self.g, self.c_d, self.c_m, self.rho_a)

    def estimator(self) -> EstimatorConfig:
        return EstimatorConfig(self.window, self.predict_window, self.threshold, self.head_len, self.min_points)

    def logo(self) -> LogoConfig:
        return LogoConfig(
            logo_radius=self.logo_radius,
            ball_radius=self.radius,
            limb_margin_deg=self.limb_margin_deg,
            plane_weight=self.plane_weight,
            segment_fit=self.segment_fit,
        )

    def benchmark(self) -> BenchmarkConfig:
        return BenchmarkConfig(
            n_per_setting=self.n_per_setting,
            noise_sigma=self.noise,
            rate=self.rate,
            truncate_fraction=self.truncate_fraction,
            seed=self.seed,
            jitter=Jitter(self.spin_jitter, self.speed_jitter, self.vz_jitter, self.position_jitter),
            estimator=self.estimator(),
            constants=self.constants(),
            jobs=self.jobs,
        )

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _TYPES[key]
    try:
        if kind == "bool":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            return low in ("true", "1", "yes")
        if kind == "int":
            return int(raw)
        if kind == "float":
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}") from None
    return raw


def parse_config(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines into a dict of typed values."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _coerce(key, raw)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return out


def load_config(path=None, overrides: Mapping = None) -> RunConfig:
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        values.update(parse_config(text, str(path)))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return RunConfig(**values)
