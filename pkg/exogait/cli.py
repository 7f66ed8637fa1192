"""
Command line interface.

    exogait optimize --model config/exoskeleton_model.json --task config/ground_task.yml --out gait.json
    exogait simulate --model ... --task ... --gait gait.json --out trajectory.csv
    exogait replay --model ... --task ... --reference data/reference_gait_ground.csv --out reference.csv
    exogait ik --model ... --x5 0.0 --y5 0.15 --phi1 0.175 --phi3 0.0 --r2 0.5
    exogait check-dynamics --model ... --trials 1000 --seed 0
    exogait grf --left data/crutch_force_left.csv --right data/crutch_force_right.csv
    exogait reference --model ... --task ... --out reference.csv

Exit codes: 0 success, 1 invalid input or file error, 2 infeasible task or no feasible start.
"""
import argparse
import json
import logging
import os
import sys
from glob import glob
from os.path import join

import numpy as np

from .model import PoseAbs, to_relative, anatomical_angles, validate_joint_limits
from .dynamics import check_dynamics
from .kinematics import solve_pose
from .gait import sample_gait, reference_trajectory, synthetic_reference_gait
from .optimizer import optimize, swing_cost_terms, InfeasibleTaskError, InitializationError
from .metrics import grf_metric, peak_grf, compare_gaits
from .data import (load_body_model, load_task, load_optimizer_options, load_reference_gait, save_reference_gait,
                   export_trajectory, save_control_points, load_control_points, load_force_trace)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INFEASIBLE = 2


def _write_json(record, path=None):
    text = json.dumps(record, indent=2)
    if path is None:
        print(text)
    else:
        with open(path, "w") as out_file:
            out_file.write(text + "\n")
        logger.info("wrote %s", path)


def _start_client(procs):
    if procs <= 1:
        return None
    from dask.distributed import Client, LocalCluster
    cluster = LocalCluster(n_workers=0, threads_per_worker=1)
    cluster.scale(procs)
    return Client(cluster)


def run_optimize(args):
    model = load_body_model(args.model)
    task = load_task(args.task)
    options = load_optimizer_options(args.task, seed=args.seed, max_evaluations=args.max_evaluations,
                                     restarts=args.restarts)
    client = _start_client(args.proc)
    try:
        result = optimize(task, model, options, client=client)
    finally:
        if client is not None:
            client.close()
    save_control_points(result.control_points, args.out, task=task.name, cost=result.cost)
    report = dict(result.to_report(), task=task.name, penalty_weight=task.penalty_weight, seed=options.seed)
    if args.reference is not None:
        baseline = swing_cost_terms(reference_trajectory(load_reference_gait(args.reference), task, model), task)
        report["reference_torque_term"] = baseline["torque_term"]
        report["reference_peak_foot_speed"] = baseline["peak_foot_speed"]
        if baseline["torque_term"] > 0:
            report["torque_term_ratio"] = result.cost_terms["torque_term"] / baseline["torque_term"]
        if baseline["peak_foot_speed"] > 0:
            report["speed_ratio"] = result.cost_terms["peak_foot_speed"] / baseline["peak_foot_speed"]
    if args.trajectory is not None:
        export_trajectory(result.trajectory, args.trajectory)
    _write_json(report, args.report)
    return EXIT_OK


def run_simulate(args):
    model = load_body_model(args.model)
    task = load_task(args.task)
    table = sample_gait(load_control_points(args.gait), task, model)
    export_trajectory(table, args.out)
    _write_json(dict(swing_cost_terms(table, task), task=task.name))
    return EXIT_OK


def run_replay(args):
    model = load_body_model(args.model)
    task = load_task(args.task)
    reference = load_reference_gait(args.reference)
    table = reference_trajectory(reference, task, model)
    export_trajectory(table, args.out)
    _write_json(dict(swing_cost_terms(table, task), task=task.name, provenance=reference.provenance))
    return EXIT_OK


def run_ik(args):
    model = load_body_model(args.model)
    phi = solve_pose(model, args.x5, args.y5, args.phi1, args.phi3, args.r2, check_limits=False)
    theta_pose = to_relative(PoseAbs(phi))
    violations = validate_joint_limits(theta_pose, model)
    record = {"phi": phi.tolist(),
              "theta": theta_pose.theta.tolist(),
              "anatomical_deg": {k: float(np.degrees(v)) for k, v in anatomical_angles(theta_pose.theta).items()},
              "violations": [str(v) for v in violations]}
    _write_json(record)
    return EXIT_OK if not violations else EXIT_INVALID


def run_check_dynamics(args):
    report = check_dynamics(load_body_model(args.model), trials=args.trials, seed=args.seed, progress=True)
    _write_json(report)
    return EXIT_OK if report["passed"] else EXIT_INVALID


def _trial_pairs(path, column, sample_time):
    lefts = sorted(glob(join(path, "*left*.csv")))
    rights = sorted(glob(join(path, "*right*.csv")))
    if not lefts or len(lefts) != len(rights):
        raise ValueError(f"{path} needs matching *left*.csv and *right*.csv trial files")
    return [(load_force_trace(left, column, sample_time), load_force_trace(right, column, sample_time))
            for left, right in zip(lefts, rights)]


def run_grf(args):
    if args.baseline is not None or args.proposed is not None:
        if args.baseline is None or args.proposed is None:
            raise ValueError("--baseline and --proposed go together")
        table = compare_gaits(_trial_pairs(args.baseline, args.column, args.sample_time),
                              _trial_pairs(args.proposed, args.column, args.sample_time), trim=args.trim)
        _write_json({metric: row.to_dict() for metric, row in table.iterrows()})
        return EXIT_OK
    if args.left is None or args.right is None:
        raise ValueError("grf needs --left and --right, or --baseline and --proposed")
    left = load_force_trace(args.left, args.column, args.sample_time)
    right = load_force_trace(args.right, args.column, args.sample_time)
    _write_json({"F": grf_metric(left, right), "left_peak": peak_grf(left), "right_peak": peak_grf(right),
                 "samples": int(left.samples.size), "sample_time": left.sample_time})
    return EXIT_OK


def run_reference(args):
    model = load_body_model(args.model)
    task = load_task(args.task)
    save_reference_gait(synthetic_reference_gait(task, model, knots=args.knots), args.out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="exogait", description="Swing gait generation for a 5-link exoskeleton")
    sub = parser.add_subparsers(dest="command", required=True)

    opt = sub.add_parser("optimize", help="Minimize swing phase ankle torque")
    opt.add_argument("--model", required=True, help="Body model JSON file")
    opt.add_argument("--task", required=True, help="Gait task YAML file")
    opt.add_argument("--out", required=True, help="Output control point JSON file")
    opt.add_argument("--seed", type=int, default=None, help="Random seed of the restarts")
    opt.add_argument("--max-evaluations", type=int, default=None, help="Cost evaluations per start")
    opt.add_argument("--restarts", type=int, default=None, help="Random restarts")
    opt.add_argument("--report", default=None, help="Report JSON file (stdout when omitted)")
    opt.add_argument("--reference", default=None, help="Reference gait CSV to compare against")
    opt.add_argument("--trajectory", default=None, help="Also export the optimized trajectory")
    opt.add_argument("-p", "--proc", type=int, default=1, help="Number of processors for restarts")
    opt.set_defaults(func=run_optimize)

    sim = sub.add_parser("simulate", help="Sample a gait and compute joint torques")
    sim.add_argument("--model", required=True)
    sim.add_argument("--task", required=True)
    sim.add_argument("--gait", required=True, help="Control point JSON file")
    sim.add_argument("--out", required=True, help="Trajectory file (.csv, .parquet or .nc)")
    sim.set_defaults(func=run_simulate)

    rep = sub.add_parser("replay", help="Compute torques along a joint space reference gait")
    rep.add_argument("--model", required=True)
    rep.add_argument("--task", required=True)
    rep.add_argument("--reference", required=True, help="Reference gait CSV")
    rep.add_argument("--out", required=True, help="Trajectory file (.csv, .parquet or .nc)")
    rep.set_defaults(func=run_replay)

    ik = sub.add_parser("ik", help="Solve one pose from the swing foot position")
    ik.add_argument("--model", required=True)
    for name in ("x5", "y5", "phi1", "phi3", "r2"):
        ik.add_argument(f"--{name}", type=float, required=True)
    ik.set_defaults(func=run_ik)

    dyn = sub.add_parser("check-dynamics", help="Compare closed form torques with the Lagrangian")
    dyn.add_argument("--model", required=True)
    dyn.add_argument("--trials", type=int, default=1000)
    dyn.add_argument("--seed", type=int, default=0)
    dyn.set_defaults(func=run_check_dynamics)

    grf = sub.add_parser("grf", help="Crutch ground reaction force metric")
    grf.add_argument("--left", default=None, help="Left crutch force CSV")
    grf.add_argument("--right", default=None, help="Right crutch force CSV")
    grf.add_argument("--baseline", default=None, help="Directory of reference gait trials")
    grf.add_argument("--proposed", default=None, help="Directory of optimized gait trials")
    grf.add_argument("--column", default=None, help="Force column name")
    grf.add_argument("--sample-time", type=float, default=0.01)
    grf.add_argument("--trim", type=int, default=3, help="Trials dropped from each end")
    grf.set_defaults(func=run_grf)

    ref = sub.add_parser("reference", help="Write a synthetic joint space reference gait")
    ref.add_argument("--model", required=True)
    ref.add_argument("--task", required=True)
    ref.add_argument("--out", required=True)
    ref.add_argument("--knots", type=int, default=17)
    ref.set_defaults(func=run_reference)
    return parser


def main(argv=None):
    logging.basicConfig(level=os.environ.get("LOGLEVEL", "INFO"))
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InfeasibleTaskError, InitializationError) as err:
        logger.error(str(err))
        return EXIT_INFEASIBLE
    except (ValueError, OSError) as err:
        logger.error(str(err))
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
