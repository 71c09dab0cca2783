"""Command-line entry point: ``stereorot <command> ...``.

Human-readable output uses degrees; every file format stores radians.
"""

import argparse
import json
import sys

import numpy as np

from . import bench, io, voting
from .baselines import OracleConfig, grid_oracle_axis
from .errors import RotationEstimationError
from .estimator import EstimatorConfig, estimate_multi, estimate_single, preprocess
from .synth import SynthConfig, generate_scene


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _estimator_flags():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("estimator")
    g.add_argument("--grid", type=int, default=voting.DEFAULT_GRID, help="accumulator cells per side")
    g.add_argument("--extent", type=float, default=voting.DEFAULT_EXTENT,
                   help="half-width of the projected plane")
    g.add_argument("--theta-samples", type=int, default=voting.DEFAULT_SAMPLES,
                   help="samples per constraint circle")
    g.add_argument("--epsilon", type=float, default=0.015, help="inlier threshold on |r.z|")
    g.add_argument("--angle-bins", type=int, default=1024)
    g.add_argument("--max-models", type=int, default=3)
    g.add_argument("--min-votes-frac", type=float, default=0.01)
    g.add_argument("--refine", action=argparse.BooleanOptionalAction, default=True)
    g.add_argument("--threads", type=int, default=None,
                   help=f"voting threads (default: ${voting.THREADS_ENV} or all cores)")
    return p


def _config(args):
    return EstimatorConfig(grid=args.grid, extent=args.extent, samples=args.theta_samples,
                           epsilon=args.epsilon, angle_bins=args.angle_bins,
                           max_models=args.max_models, min_votes_frac=args.min_votes_frac,
                           refine=args.refine, threads=args.threads)


def _print_estimates(estimates, out):
    for k, e in enumerate(estimates):
        axis = " ".join(f"{v:+.6f}" for v in e.axis)
        out.write(f"model {k}: axis [{axis}] angle {np.degrees(e.angle):+.4f} deg "
                  f"inliers {e.inlier_count} votes {e.axis_votes} time {e.elapsed:.3f} s\n")


def _emit(estimates, args):
    if args.output:
        io.write_result(estimates, args.output)
    if args.format == "json" and not args.output:
        ordered = sorted(estimates, key=lambda e: -e.axis_votes)
        json.dump([io.estimate_to_dict(e) for e in ordered], sys.stdout, indent=1)
        sys.stdout.write("\n")
    elif args.format == "text":
        _print_estimates(estimates, sys.stdout)


def cmd_estimate(args):
    x, y = io.read_correspondences(args.input)
    _emit([estimate_single(x, y, _config(args))], args)
    return 0


def cmd_multi(args):
    x, y = io.read_correspondences(args.input)
    _emit(estimate_multi(x, y, _config(args)), args)
    return 0


def cmd_synth(args):
    cfg = SynthConfig(n=args.n, outlier_ratio=args.rho, sigma=args.sigma, models=args.models,
                      weights=args.weights, seed=args.seed)
    x, y, truth = generate_scene(cfg)
    io.write_correspondences(args.output, x, y)
    if args.truth:
        io.write_truth(truth, args.truth)
    return 0


def cmd_oracle(args):
    x, y = io.read_correspondences(args.input)
    constraints, _ = preprocess(x, y)
    axis, count = grid_oracle_axis(constraints, OracleConfig(args.directions, args.epsilon))
    print(f"axis [{' '.join(f'{v:+.6f}' for v in axis)}] consensus {count}")
    return 0


def cmd_dump_acc(args):
    x, y = io.read_correspondences(args.input)
    cfg = _config(args)
    constraints, _ = preprocess(x, y, cfg.degeneracy_tol, cfg.normalize)
    acc = voting.accumulate(constraints, cfg.grid, cfg.extent, cfg.samples, cfg.threads)
    io.dump_accumulator(acc, args.output, args.format)
    return 0


def cmd_bench(args):
    estimators = tuple(args.estimators.split(",")) if args.estimators else (
        bench.MULTI_ESTIMATORS if args.models > 1 else bench.SINGLE_ESTIMATORS)
    common = dict(trials=args.trials, sigma=args.sigma, models=args.models,
                  weights=args.weights, estimators=estimators,
                  threshold_deg=args.threshold, ransac_iterations=args.iterations)
    if args.sweep == "rho":
        scenarios = bench.rho_sweep(args.rhos, n=args.n, **common)
    else:
        scenarios = bench.n_sweep(args.sizes, rho=args.rho, **common)
    records = bench.run_benchmark(scenarios, base_seed=args.seed, cfg=_config(args))
    if args.output:
        with open(args.output, "w", newline="") as fh:
            bench.write_benchmark_csv(records, fh, include_time=args.timing)
    else:
        bench.write_benchmark_csv(records, sys.stdout, include_time=args.timing)
    failed = [r for r in records if r.error]
    for r in failed:
        print(f"trial {r.trial} of {r.scenario} ({r.estimator}) failed: {r.error}",
              file=sys.stderr)
    return 1 if failed else 0


def build_parser():
    est = _estimator_flags()
    parser = argparse.ArgumentParser(prog="stereorot",
                                     description="Outlier-robust rotation estimation.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, func, help_ in (("estimate", cmd_estimate, "fit one rotation"),
                              ("multi", cmd_multi, "fit several rotations")):
        p = sub.add_parser(name, parents=[est], help=help_)
        p.add_argument("input", help="correspondence CSV")
        p.add_argument("-o", "--output", help="write the result document here")
        p.add_argument("--format", choices=("text", "json"), default="text")
        p.add_argument("--seed", type=int, default=0, help="unused; accepted for uniformity")
        p.set_defaults(func=func)

    p = sub.add_parser("synth", help="write a synthetic scene")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--truth", help="ground-truth sidecar path")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=0.01)
    p.add_argument("--models", type=int, default=1)
    p.add_argument("--weights", type=_floats, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("csv",), default="csv")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", parents=[est], help="run a seeded sweep")
    p.add_argument("--sweep", choices=("rho", "n"), default="rho")
    p.add_argument("--rhos", type=_floats, default=(0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9))
    p.add_argument("--sizes", type=_ints, default=(1000, 10_000, 100_000))
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--rho", type=float, default=0.9)
    p.add_argument("--sigma", type=float, default=0.01)
    p.add_argument("--models", type=int, default=1)
    p.add_argument("--weights", type=_floats, default=None)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--estimators", help="comma list of " + ",".join(
        bench.SINGLE_ESTIMATORS + bench.MULTI_ESTIMATORS))
    p.add_argument("--iterations", type=int, default=1000, help="RANSAC iterations per model")
    p.add_argument("--threshold", type=float, default=1.0, help="success threshold in degrees")
    p.add_argument("--timing", action=argparse.BooleanOptionalAction, default=True,
                   help="fill the time_s column")
    p.add_argument("--seed", type=int, default=0, help="base seed; trial t uses seed + t")
    p.add_argument("-o", "--output")
    p.add_argument("--format", choices=("csv",), default="csv")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle", help="exhaustive consensus axis")
    p.add_argument("input")
    p.add_argument("--directions", type=int, default=10_000)
    p.add_argument("--epsilon", type=float, default=0.015)
    p.add_argument("--seed", type=int, default=0, help="unused; accepted for uniformity")
    p.add_argument("--format", choices=("text",), default="text")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("dump-acc", parents=[est], help="write the axis vote grid")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--format", choices=("text", "pgm"), default="text")
    p.add_argument("--seed", type=int, default=0, help="unused; accepted for uniformity")
    p.set_defaults(func=cmd_dump_acc)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (RotationEstimationError, ValueError, OSError) as exc:
        print(f"stereorot {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
