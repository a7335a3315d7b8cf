"""Command-line front end: ``wirecal generate | calibrate | evaluate | compare``.

Exit codes: 0 success, 1 divergence or non-convergence, 2 I/O or parse error.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import datagen, robotio
from .calibration import (
    CalibrationConfig,
    MeasurementSet,
    calibrate,
    default_column_scaling,
    evaluate,
    mask_from_names,
)
from .errors import CalibrationDivergedError, InvalidArgumentError
from .kinematics import N_PARAMS
from .optimizer import VARIANTS, OptimizerConfig, variant_config

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_IO = 2


class UsageError(Exception):
    pass


def _err(msg):
    print(f"wirecal: error: {msg}", file=sys.stderr)


def parse_mask(text: str) -> np.ndarray:
    if len(text) != N_PARAMS or set(text) - {"0", "1"}:
        raise argparse.ArgumentTypeError("--mask needs 24 characters of 0/1 in flatten order")
    return np.array([c == "1" for c in text])


def _add_optimizer_flags(p):
    d = OptimizerConfig()
    g = p.add_argument_group("optimizer")
    g.add_argument("--eta", type=float, default=d.eta)
    g.add_argument("--beta1", type=float, default=d.beta1)
    g.add_argument("--beta2", type=float, default=d.beta2)
    g.add_argument("--beta3", type=float, default=d.beta3)
    g.add_argument("--sigma", type=float, default=d.sigma)
    g.add_argument("--zeta", type=float, default=d.zeta)
    c = p.add_argument_group("calibration")
    c.add_argument("--max-iters", type=int, default=CalibrationConfig.max_iters)
    c.add_argument("--tol-rel", type=float, default=CalibrationConfig.tol_rel)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--mask", type=parse_mask, default=None,
                   help="24 chars of 0/1 in [alpha|a|d|theta] order; 0 keeps the nominal value")
    c.add_argument("--freeze", default="",
                   help="comma-separated parameter names kept at nominal, e.g. theta6,d3")
    c.add_argument("--column-scaling", action="store_true",
                   help="optimise angles as arc length at 1000 mm")
    c.add_argument("--workers", type=int, default=1)


def _mask(args):
    names = [n.strip() for n in args.freeze.split(",") if n.strip()]
    if not names:
        return args.mask
    mask = mask_from_names(names)
    return mask if args.mask is None else mask & args.mask


def _calibration_config(args, optimizer=None) -> CalibrationConfig:
    optimizer = optimizer or OptimizerConfig(
        eta=args.eta, beta1=args.beta1, beta2=args.beta2, beta3=args.beta3,
        sigma=args.sigma, zeta=args.zeta)
    return CalibrationConfig(
        optimizer=optimizer,
        max_iters=args.max_iters,
        tol_rel=args.tol_rel,
        param_mask=_mask(args),
        column_scaling=default_column_scaling() if args.column_scaling else None,
        seed=args.seed,
        workers=args.workers,
    )


def _load_set(path, rig, what) -> MeasurementSet:
    q, c = robotio.read_measurements(path)
    if len(c) == 0:
        raise UsageError(f"{what} file {path} has no records")
    return MeasurementSet(q, c, rig)


# --- generate -----------------------------------------------------------------

def cmd_generate(args) -> int:
    robot = robotio.load_robot(args.robot)
    try:
        sc = datagen.make_scenario(
            robot.nominal, robot.rig, n=args.n, split=args.split,
            angle_bound=np.radians(args.angle_bound_deg), length_bound=args.length_bound_mm,
            noise_sigma=args.noise_sigma, seed=args.seed, joint_limits=robot.joint_limits,
            noise_seed=args.noise_seed)
    except InvalidArgumentError as exc:
        raise UsageError(str(exc)) from None
    truth = sc.truth
    perturb_seed, config_seed, noise_seed = sc.seeds
    n_train = len(sc.train)
    prefix = args.out_prefix
    robotio.write_measurements(f"{prefix}_train.csv", sc.q_deg[:n_train], sc.c_measured[:n_train])
    robotio.write_measurements(f"{prefix}_holdout.csv", sc.q_deg[n_train:], sc.c_measured[n_train:])
    robotio.write_json(f"{prefix}_truth.json", {
        "rng": datagen.RNG_ALGORITHM,
        "seed": args.seed,
        "sub_seeds": {"perturbation": perturb_seed, "configs": config_seed, "noise": noise_seed},
        "perturbation": {"angle_bound_deg": args.angle_bound_deg, "length_bound_mm": args.length_bound_mm},
        "noise": {"sigma_mm": args.noise_sigma},
        "n": args.n,
        "split": args.split,
        "true_params": robotio.links_to_json(truth),
        "true_flat": [float(v) for v in truth.flatten()],
        "nominal_flat": [float(v) for v in robot.nominal.flatten()],
    })
    print(f"wrote {n_train} training and {args.n - n_train} holdout records to {prefix}_*.csv")
    return EXIT_OK


# --- calibrate ----------------------------------------------------------------

def cmd_calibrate(args) -> int:
    robot = robotio.load_robot(args.robot)
    train = _load_set(args.train, robot.rig, "training")
    holdout = _load_set(args.holdout, robot.rig, "holdout") if args.holdout else None
    config = _calibration_config(args)

    trace_fh = open(args.trace_csv, "w", encoding="utf-8", newline="") if args.trace_csv else None
    writer = None
    if trace_fh:
        writer = csv.writer(trace_fh, lineterminator="\n")
        writer.writerow(robotio.TRACE_HEADER)

    def on_iteration(k, m):
        if writer:
            writer.writerow([k, repr(m.rmse), repr(m.mean), repr(m.max)])
            trace_fh.flush()

    try:
        report = calibrate(robot.nominal, train, config, holdout=holdout, on_iteration=on_iteration)
    except CalibrationDivergedError as exc:
        _err(str(exc))
        if exc.report is not None:
            robotio.write_json(args.out, robotio.report_to_json(exc.report, not args.no_wall_time))
        return EXIT_FAILED
    finally:
        if trace_fh:
            trace_fh.close()

    robotio.write_json(args.out, robotio.report_to_json(report, not args.no_wall_time))
    print(report.final_metrics)
    if report.holdout_metrics is not None:
        print(f"holdout {report.holdout_metrics}")
    if not report.converged:
        _err(f"not converged after {report.iterations_run} iterations")
        return EXIT_FAILED
    return EXIT_OK


# --- evaluate -----------------------------------------------------------------

def cmd_evaluate(args) -> int:
    robot = robotio.load_robot(args.robot)
    holdout = _load_set(args.holdout, robot.rig, "holdout")
    before = evaluate(robot.nominal, holdout)
    rows = {"before": before}
    if args.report:
        params = robotio.params_from_report(robotio.load_report(args.report), robot.nominal)
        rows["after"] = evaluate(params, holdout)
    for name, m in rows.items():
        print(f"{name:<7}{m}")
    if args.out_json:
        robotio.write_json(args.out_json, {k: m.as_dict() for k, m in rows.items()})
    return EXIT_OK


# --- compare ------------------------------------------------------------------

def cmd_compare(args) -> int:
    robot = robotio.load_robot(args.robot)
    train = _load_set(args.train, robot.rig, "training")
    holdout = _load_set(args.holdout, robot.rig, "holdout")
    names = [s.strip() for s in args.ablations.split(",") if s.strip()]
    if not names or any(n not in VARIANTS for n in names):
        raise UsageError(f"--ablations must list some of {','.join(VARIANTS)}")

    base = OptimizerConfig(eta=args.eta, beta1=args.beta1, beta2=args.beta2, beta3=args.beta3,
                           sigma=args.sigma, zeta=args.zeta)
    variants, traces, status = {}, {}, EXIT_OK
    for name in names:
        cfg = _calibration_config(args, variant_config(name, base))
        try:
            report = calibrate(robot.nominal, train, cfg, holdout=holdout)
        except CalibrationDivergedError as exc:
            _err(f"{name}: {exc}")
            variants[name] = {"diverged": True}
            status = EXIT_FAILED
            continue
        o = cfg.optimizer
        variants[name] = {
            "config": {"eta": o.eta, "beta1": o.beta1, "beta2": o.beta2, "beta3": o.beta3,
                       "sigma": o.sigma, "zeta": o.zeta},
            "converged": report.converged,
            "iterations_run": report.iterations_run,
            "iterations_to_converge": report.iterations_run if report.converged else None,
            "final": report.final_metrics.as_dict(),
            "holdout": report.holdout_metrics.as_dict(),
            "wall_time_s": None if args.no_wall_time else report.wall_time,
        }
        traces[name] = [[k, m.rmse, m.mean, m.max] for k, m in enumerate(report.trace)]
        print(f"{name:<8} iters={report.iterations_run:<5} converged={report.converged!s:<5} "
              f"train {report.final_metrics}  holdout {report.holdout_metrics}")
        if not report.converged:
            status = EXIT_FAILED

    robotio.write_json(args.out, {"variants": variants, "traces": traces,
                                  "trace_columns": robotio.TRACE_HEADER})
    if args.trace_csv:
        with open(args.trace_csv, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["variant"] + robotio.TRACE_HEADER)
            for name, rows in traces.items():
                for k, *vals in rows:
                    w.writerow([name, k] + [repr(v) for v in vals])
    return status


# --- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wirecal",
        description="D-H calibration of a 6R arm from draw-wire length measurements (AdaModW).")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesise a perturbed robot and wire-length datasets")
    p.add_argument("--robot", required=True)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--split", type=float, default=0.8, help="fraction of records used for training")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-seed", type=int, default=None, help="override the noise stream seed")
    p.add_argument("--angle-bound-deg", type=float, default=0.5)
    p.add_argument("--length-bound-mm", type=float, default=1.0)
    p.add_argument("--noise-sigma", type=float, default=datagen.DEFAULT_NOISE_SIGMA, help="mm")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("calibrate", help="identify D-H deviations from a training CSV")
    p.add_argument("--robot", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--holdout")
    p.add_argument("--out", required=True, help="report JSON")
    p.add_argument("--trace-csv")
    p.add_argument("--no-wall-time", action="store_true",
                   help="write wall_time_s as null so repeated runs are byte-identical")
    _add_optimizer_flags(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="before/after metrics on a holdout CSV")
    p.add_argument("--robot", required=True)
    p.add_argument("--holdout", required=True)
    p.add_argument("--report", help="calibration report JSON; omit for nominal-only")
    p.add_argument("--out-json")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="run Adam/AdamW/AdaMod/AdaModW on the same data")
    p.add_argument("--robot", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--holdout", required=True)
    p.add_argument("--ablations", default=",".join(VARIANTS))
    p.add_argument("--out", required=True)
    p.add_argument("--trace-csv")
    p.add_argument("--no-wall-time", action="store_true")
    _add_optimizer_flags(p)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, UsageError, InvalidArgumentError) as exc:
        _err(str(exc))
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
