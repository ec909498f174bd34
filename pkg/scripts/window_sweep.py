"""Spin and bounce errors against the estimation / prediction window lengths.

Prints one line per (window, predict_window) pair: median axis error of the
full-flight spin estimate, cluster accuracy and mean bounce errors.
"""

import argparse
import math
from dataclasses import replace

import numpy as np

from ttspin.evaluation import BenchmarkConfig, bounce_table, cluster_classify, run_trials
from ttspin.magnus_fit import EstimatorConfig
from ttspin.rotmath import angle_between


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--windows", default="30,45,80")
    p.add_argument("--predict-windows", default="30,45,80")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--noise", type=float, default=0.002)
    p.add_argument("--jobs", type=int, default=1)
    a = p.parse_args()
    base = BenchmarkConfig(n_per_setting=a.trials, noise_sigma=a.noise, jobs=a.jobs)
    for w in map(int, a.windows.split(",")):
        for pw in map(int, a.predict_windows.split(",")):
            cfg = replace(base, estimator=EstimatorConfig(window=w, predict_window=pw))
            recs = run_trials(cfg)
            axis = [
                math.degrees(angle_between(r["omega_full"], r["omega_true"])) for r in recs if r.get("omega_full")
            ]
            by = {}
            for r in recs:
                if r.get("omega_full"):
                    by.setdefault(r["setting"], []).append(r["omega_full"])
            rows = bounce_table(recs)
            fitted = np.nanmean([r.fitted_mean_mm for r in rows])
            flat = np.nanmean([r.nospin_mean_mm for r in rows])
            print(
                f"window {w:3d} predict {pw:3d}: median axis {np.median(axis):5.1f} deg,"
                f" cluster {100 * cluster_classify(by).total:5.1f} %, bounce fitted {fitted:6.1f} mm / no-spin {flat:6.1f} mm"
            )


if __name__ == "__main__":
    main()
