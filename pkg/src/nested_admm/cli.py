"""Command-line interface: ``nested-admm {generate,solve,compare,check}``."""
import argparse
import os
import sys
from dataclasses import replace

from .config import ExperimentConfig, load_config
from .estimators import ESTIMATORS
from .exceptions import (
    ConfigError,
    ConfigParseError,
    GeneratorError,
    InvalidMatrix,
    InvalidTolerance,
    IoError,
    NumericalFailure,
)
from .generators import generate_instance
from .harness import check_instance, compare_estimators, run_experiment
from .io import ensure_dir, load_instance, save_instance
from .problem import MODES

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _config(args):
    config = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["seeds"] = [args.seed]
    if args.out is not None:
        changes["out"] = args.out
    if args.estimator is not None:
        changes["estimators"] = [args.estimator]
    if args.mode is not None:
        changes["mode"] = args.mode
        changes["generator"] = replace(config.generator, mode=args.mode)
    return replace(config, **changes) if changes else config


def cmd_generate(args):
    config = _config(args)
    ensure_dir(config.out)
    for seed in config.seeds:
        problem = generate_instance(replace(config.generator, seed=seed))
        path = os.path.join(config.out, f"instance_seed{seed}.json")
        save_instance(problem, path)
        print(path)
    return EXIT_OK


def cmd_solve(args):
    config = _config(args)
    status, rows, files = run_experiment(config)
    for row in rows:
        seed, est, mode, eps, samples, iters, stat = row
        print(f"seed={seed} estimator={est} eps={eps:g} samples_to_eps={samples} iterations={iters} stat={stat:.3e}")
    print(f"wrote {len(files)} files to {config.out}")
    return status


def cmd_compare(args):
    config = _config(args)
    if args.estimator is None and len(config.estimators) < 2:
        config = replace(config, estimators=list(ESTIMATORS))
    table, rows, files = compare_estimators(config)
    for est, eps, med, reached, runs, exp in table:
        exp_txt = "n/a" if exp is None else f"{exp:.2f}"
        print(f"{est:10s} eps={eps:<8g} median_samples={med:.4g} reached={reached}/{runs} exponent={exp_txt}")
    print(f"wrote {len(files)} files to {config.out}")
    return EXIT_OK


def cmd_check(args):
    if args.instance:
        problem = load_instance(args.instance)
        seed = args.seed or 0
    else:
        config = _config(args)
        seed = config.seeds[0]
        problem = generate_instance(replace(config.generator, seed=seed))
    ok = True
    for name, passed, detail in check_instance(problem, seed=seed):
        ok &= bool(passed)
        print(f"{'PASS' if passed else 'FAIL'}  {name}  ({detail})")
    return EXIT_OK if ok else EXIT_NUMERICAL


def build_parser():
    parser = argparse.ArgumentParser(prog="nested-admm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, help_text in (
        ("generate", cmd_generate, "write generated instances as JSON files"),
        ("solve", cmd_solve, "run the solver and write trace CSVs plus a summary"),
        ("compare", cmd_compare, "compare estimators on samples-to-eps"),
        ("check", cmd_check, "run the invariant suite on an instance"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="INI experiment config")
        p.add_argument("--seed", type=int, help="single seed (overrides the config seed list)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--estimator", choices=ESTIMATORS)
        p.add_argument("--mode", choices=MODES)
        if name == "check":
            p.add_argument("--instance", help="saved instance file to check")
        p.set_defaults(func=func)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigParseError, ConfigError, InvalidTolerance, GeneratorError, IoError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, InvalidMatrix, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
