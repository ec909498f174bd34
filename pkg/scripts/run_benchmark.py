"""Bounce-prediction and clustering benchmark on the synthetic catalog.

    python scripts/run_benchmark.py --trials 50 --noise 0.002 --jobs 4
"""

import argparse
import time

from ttspin.cli import evaluate_report
from ttspin.config import RunConfig
from ttspin.evaluation import run_trials


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--noise", type=float, default=0.002)
    p.add_argument("--rate", type=float, default=150.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    a = p.parse_args()
    cfg = RunConfig(n_per_setting=a.trials, noise=a.noise, rate=a.rate, seed=a.seed, jobs=a.jobs)
    start = time.perf_counter()
    report = evaluate_report(run_trials(cfg.benchmark()), cfg)
    print(f"{'setting':16s} {'fitted mm':>14s} {'no-spin mm':>14s} {'cluster %':>10s}")
    for row in report["bounce"]:
        name = row["setting"]
        print(
            f"{name:16s} {row['fitted_mean_mm']:7.1f} ± {row['fitted_std_mm']:5.1f}"
            f" {row['nospin_mean_mm']:7.1f} ± {row['nospin_std_mm']:5.1f}"
            f" {100 * report['cluster']['accuracy'][name]:10.1f}"
        )
    print(f"total cluster accuracy {100 * report['cluster']['total']:.1f} %")
    print(f"topspin/high fitted / no-spin ratio {report['topspin_high_ratio']:.3f}")
    print(f"checks {report['checks']}  ({time.perf_counter() - start:.1f} s)")


if __name__ == "__main__":
    main()
