"""Spin estimation for table-tennis balls from logo observations or trajectory shape."""

from .magnus_fit import EstimationError, EstimatorConfig, SpinEstimate, estimate_spin, predict_bounce
from .physics import BallState, PhysicalConstants, Trajectory, bounce_point, simulate_logo, simulate_observations

__all__ = [
    "BallState",
    "EstimationError",
    "EstimatorConfig",
    "PhysicalConstants",
    "SpinEstimate",
    "Trajectory",
    "bounce_point",
    "estimate_spin",
    "predict_bounce",
    "simulate_logo",
    "simulate_observations",
]
