"""``ttspin`` command line: simulate, fit-spin, logo-spin, evaluate.

Exit codes: 0 success, 1 input error, 2 estimation error, 3 acceptance failure.
"""

from __future__ import annotations

import argparse
import math
import sys
import warnings
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import evaluation, io, physics
from .config import ConfigError, RunConfig, load_config
from .logo_spin import estimate_spin_logo
from .magnus_fit import EstimationError, estimate_spin, first_flight_segment
from .physics import BallState
from .rotmath import Quat, random_quat

EXIT_OK, EXIT_INPUT, EXIT_ESTIMATION, EXIT_ACCEPTANCE = 0, 1, 2, 3

DEFAULT_POSITION = (-1.8, 0.0, 0.35)
DEFAULT_VELOCITY = (5.0, 0.0, 2.5)


class InputError(Exception):
    pass


def _vector(text: str) -> tuple:
    try:
        v = tuple(float(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,z got {text!r}") from None
    if len(v) != 3 or not all(math.isfinite(x) for x in v):
        raise argparse.ArgumentTypeError(f"expected three finite numbers, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--rate", type=float, help="trajectory camera rate, Hz")
    common.add_argument("--noise", type=float, help="position noise sigma, m")
    common.add_argument("--jobs", type=int, help="worker processes for evaluate")
    common.add_argument("--out", help="output directory")

    p = argparse.ArgumentParser(prog="ttspin", description="Table-tennis ball spin estimation.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="write trajectory, logo and truth files")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--setting", help="catalog setting, e.g. topspin:high")
    g.add_argument("--omega", type=_vector, help="spin vector wx,wy,wz in rad/s")
    s.add_argument("--position", type=_vector, help="initial position x,y,z (m), with --omega")
    s.add_argument("--velocity", type=_vector, help="initial velocity vx,vy,vz (m/s), with --omega")
    s.add_argument("--contours", action="store_true", help="also write contours.csv")

    f = sub.add_parser("fit-spin", parents=[common], help="spin from a trajectory CSV")
    f.add_argument("file")

    lg = sub.add_parser("logo-spin", parents=[common], help="spin from a logo or contour CSV")
    lg.add_argument("file")

    sub.add_parser("evaluate", parents=[common], help="bounce and clustering benchmarks")
    return p


def _config(args) -> RunConfig:
    overrides = {"seed": args.seed, "rate": args.rate, "noise": args.noise, "jobs": args.jobs, "out": args.out}
    return load_config(args.config, overrides)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out}: {exc.strerror}") from None
    return out


def _visible_orientation(rng: np.random.Generator, min_z: float = 0.5) -> Quat:
    while True:
        q = random_quat(rng)
        if q.rotate(np.array([0.0, 0.0, 1.0]))[2] > min_z:
            return q


def cmd_simulate(args, cfg: RunConfig, stdout) -> int:
    c = cfg.constants()
    if args.setting:
        name = args.setting.replace(":", "/")
        catalog = evaluation.settings_by_name()
        if name not in catalog:
            raise InputError(f"unknown setting {args.setting!r}; choose from {', '.join(sorted(catalog))}")
        setting = catalog[name]
        launch, omega = setting.launch, setting.omega
    else:
        name = None
        omega = np.array(args.omega)
        launch = BallState(0.0, args.position or DEFAULT_POSITION, args.velocity or DEFAULT_VELOCITY)
    try:
        omega = physics.check_spin(omega)
        flight = physics.simulate_flight(launch, omega, c, cfg.rate)
        bounce = physics.bounce_point(flight)
        obs = physics.simulate_observations(launch, omega, c, cfg.rate, cfg.noise, seed=cfg.seed)
        q0 = _visible_orientation(np.random.default_rng([cfg.seed, 1]))
        logo = physics.simulate_logo(
            q0,
            omega,
            cfg.logo_rate,
            (cfg.logo_frames - 1) / cfg.logo_rate,
            cfg.miss_prob,
            seed=cfg.seed,
            visibility_threshold=cfg.logo_visibility,
        )
    except (ValueError, physics.NoBounceError) as exc:
        raise InputError(str(exc)) from None
    out = _out_dir(cfg)
    truth = {
        "setting": name,
        "omega": omega,
        "initial_state": {"t": launch.t, "position": launch.position, "velocity": launch.velocity},
        "bounce": {"position": bounce.position, "time": bounce.time},
        "logo_initial_orientation": q0.as_array(),
        "seed": cfg.seed,
        "rate": cfg.rate,
        "noise": cfg.noise,
    }
    try:
        io.write_trajectory_csv(out / "trajectory.csv", obs)
        io.write_logo_csv(out / "logo.csv", logo)
        io.write_json(out / "truth.json", truth)
        if args.contours:
            pix = physics.simulate_contours(logo, cfg.radius_px)
            frames = [
                io.ContourFrame(t, p if p is not None else np.zeros((0, 2)), cfg.radius_px) for t, p in zip(logo.t, pix)
            ]
            io.write_contour_csv(out / "contours.csv", frames)
    except OSError as exc:
        raise InputError(f"cannot write to {out}: {exc.strerror}") from None
    stdout.write(io.dumps_json({"out": str(out), "n_observations": len(obs), "bounce_time": bounce.time}))
    return EXIT_OK


def _estimation_failure(exc: EstimationError, stdout) -> int:
    stdout.write(io.dumps_json({"error": exc.code, "message": str(exc)}))
    return EXIT_ESTIMATION


def cmd_fit_spin(args, cfg: RunConfig, stdout) -> int:
    traj = io.read_trajectory_csv(args.file)
    segment = first_flight_segment(traj, cfg.radius)
    try:
        est = estimate_spin(segment, cfg.constants(), cfg.estimator())
    except EstimationError as exc:
        return _estimation_failure(exc, stdout)
    stdout.write(io.dumps_json(est.to_dict()))
    return EXIT_OK


def cmd_logo_spin(args, cfg: RunConfig, stdout) -> int:
    data = io.read_logo_input(args.file)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            est = estimate_spin_logo(data, cfg.logo())
    except EstimationError as exc:
        return _estimation_failure(exc, stdout)
    stdout.write(io.dumps_json(est.to_dict()))
    return EXIT_OK


def _text_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    line = lambda r: "  ".join(str(x).ljust(w) for x, w in zip(r, widths)).rstrip()
    return "\n".join([line(header), line(["-" * w for w in widths])] + [line(r) for r in rows]) + "\n"


def _write_table(out: Path, stem: str, header: List[str], rows: List[List[str]]) -> None:
    io.write_rows(out / f"{stem}.csv", header, rows)
    (out / f"{stem}.txt").write_text(_text_table(header, rows))


def evaluate_report(records: Sequence[dict], cfg: RunConfig) -> dict:
    """Tables and acceptance verdicts from benchmark trial records."""
    rows = evaluation.bounce_table(records)
    trials, by_name = {}, {}
    for r in records:
        trials[r["setting"]] = trials.get(r["setting"], 0) + 1
        if r.get("omega_full") is not None:
            by_name.setdefault(r["setting"], []).append(r["omega_full"])
    # settings with fewer than 2 estimates get no centre; failed estimates count as misses
    clusterable = {k: v for k, v in by_name.items() if len(v) >= 2}
    cluster = evaluation.cluster_classify(clusterable) if len(clusterable) >= 1 else None
    correct = {n: sum(a == n for a in cluster.assignments.get(n, [])) if cluster else 0 for n in trials}
    accuracy = {n: correct[n] / trials[n] for n in trials}
    total = sum(correct.values()) / sum(trials.values())
    fitted_better = all(r.fitted_mean_mm < r.nospin_mean_mm for r in rows)
    top = next((r for r in rows if r.setting == "topspin/high"), None)
    ratio = top.fitted_mean_mm / top.nospin_mean_mm if top else math.nan
    checks = {
        "fitted_below_nospin": bool(fitted_better),
        "topspin_high_ratio": bool(ratio < cfg.max_topspin_ratio),
        "cluster_accuracy": bool(total >= cfg.min_cluster_accuracy),
    }
    return {
        "bounce": [r.__dict__ for r in rows],
        "cluster": {
            "accuracy": accuracy,
            "total": total,
            "centers": dict(cluster.centers) if cluster else {},
            "degenerate": bool(cluster.degenerate) if cluster else True,
            "failed_estimates": {n: trials[n] - len(by_name.get(n, [])) for n in trials},
        },
        "topspin_high_ratio": ratio,
        "checks": checks,
        "passed": all(checks.values()),
        "config": {"seed": cfg.seed, "noise": cfg.noise, "rate": cfg.rate, "n_per_setting": cfg.n_per_setting},
    }


def cmd_evaluate(args, cfg: RunConfig, stdout) -> int:
    out = _out_dir(cfg)
    records = evaluation.run_trials(cfg.benchmark())
    report = evaluate_report(records, cfg)
    f = io.fmt
    bounce_rows = [
        [r["setting"], f(r["fitted_mean_mm"]), f(r["fitted_std_mm"]), f(r["nospin_mean_mm"]), f(r["nospin_std_mm"]), str(r["n"]), str(r["excluded"])]
        for r in report["bounce"]
    ]
    acc = report["cluster"]["accuracy"]
    cluster_rows = [[name, f(100 * acc[name])] for name in sorted(acc)] + [["total", f(100 * report["cluster"]["total"])]]
    try:
        _write_table(out, "bounce_table", ["setting", "fitted_mean_mm", "fitted_std_mm", "nospin_mean_mm", "nospin_std_mm", "n", "excluded"], bounce_rows)
        _write_table(out, "cluster_table", ["setting", "accuracy_pct"], cluster_rows)
        io.write_json(out / "report.json", report)
    except OSError as exc:
        raise InputError(f"cannot write to {out}: {exc.strerror}") from None
    stdout.write(io.dumps_json({"passed": report["passed"], "checks": report["checks"]}))
    return EXIT_OK if report["passed"] else EXIT_ACCEPTANCE


COMMANDS = {"simulate": cmd_simulate, "fit-spin": cmd_fit_spin, "logo-spin": cmd_logo_spin, "evaluate": cmd_evaluate}


def main(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg, stdout)
    except (ConfigError, InputError, io.InputFormatError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except OSError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
