"""False-alarm rate of the start-of-track outlier filter versus noise and camera rate.

A cubic through five points extrapolated one step amplifies position noise by
about five; this prints how often clean tracks lose points.
"""

import argparse

from ttspin.magnus_fit import filter_outliers
from ttspin.physics import BallState, PhysicalConstants, simulate_observations


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--threshold", type=float, default=0.05)
    p.add_argument("--seeds", type=int, default=200)
    a = p.parse_args()
    c = PhysicalConstants()
    start = BallState(0.0, (-1.5, 0.0, 0.3), (5.0, 0.0, 2.0))
    for rate in (100, 150, 380):
        for sigma in (0.001, 0.002, 0.003, 0.004, 0.005):
            lost = []
            for seed in range(a.seeds):
                obs = simulate_observations(start, (0, 200, 0), c, rate, sigma, seed=seed, duration=40 / rate)
                lost.append(len(obs) - len(filter_outliers(obs, a.threshold)))
            clean = sum(k == 0 for k in lost) / a.seeds
            print(
                f"rate {rate:3d} Hz, sigma {1000 * sigma:.0f} mm: {100 * clean:5.1f} % tracks untouched,"
                f" mean {sum(lost) / a.seeds:5.2f} / max {max(lost):2d} points dropped"
            )


if __name__ == "__main__":
    main()
