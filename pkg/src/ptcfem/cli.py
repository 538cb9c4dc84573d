"""Command line front-end.

    ptcfem run CONFIG.toml     run an experiment (exit 0 ok, 1 config error, 2 solver failure)
    ptcfem list-problems       print the built-in problems
    ptcfem fit LOG.csv         print the final-decade slope of an iteration log
"""
import argparse
import logging
import sys

from .driver import IterationLog
from .errors import ConfigError, InsufficientData, SolverFailure
from .experiment import fit_slope, load_config, run_experiment
from .problems import builtin, list_problems

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2


def _cmd_run(args):
    config = load_config(args.config)
    summary = run_experiment(config)
    for r in summary["runs"]:
        slope = "n/a" if r["slope"] is None else f"{r['slope']:+.3f}"
        print(f"eps={r['epsilon']:.1e}  iterations={r['iterations']}  "
              f"final DOF={r['final_dof']}  estimator={r['final_total_estimator']:.3e}  "
              f"slope={slope}")
    return EXIT_OK


def _cmd_list(args):
    for name in list_problems():
        print(f"{name:20s} {builtin(name).description}")
    return EXIT_OK


def _cmd_fit(args):
    try:
        log = IterationLog.from_csv(args.log)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read log {args.log}: {exc}") from None
    print(f"{fit_slope(log):.6f}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="ptcfem", description=__doc__.splitlines()[0] or None)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run an experiment from a TOML file")
    p.add_argument("config")
    p.set_defaults(func=_cmd_run)
    p = sub.add_parser("list-problems", help="list built-in problems")
    p.set_defaults(func=_cmd_list)
    p = sub.add_parser("fit", help="fit the convergence slope of a CSV log")
    p.add_argument("log")
    p.set_defaults(func=_cmd_fit)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InsufficientData) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
