"""Command line entry point.

    copulachain <subcommand> --config <path> [--out <dir>] [--seed <u64>]

Exit codes: 0 when every inequality verdict passes or does not apply,
1 when a verdict fails, 2 for an invalid configuration and 3 for a
numerical failure.
"""

import argparse
import json
import sys

from .copulas import describe
from .errors import NumericalFailure
from .experiment import ConfigError, load_config, run_experiment

EXIT_OK, EXIT_VERDICT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

SUBCOMMANDS = {
    "validate": (),
    "coeffs": ("coeffs",),
    "profile": ("profile",),
    "doeblin": ("doeblin",),
    "simulate": ("simulate",),
    "sweep": ("sweep",),
    "run": None,
}


def _u64(text: str) -> int:
    val = int(text, 0)
    if not 0 <= val < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return val


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="copulachain",
        description="Mixing coefficients and simulation of copula-based Markov chains.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "validate": "check a configuration and print the normalized copula",
        "coeffs": "lag-1 beta, rho and phi at grid.m (and grid.m2)",
        "profile": "coefficient profile over lags 1..profile.n_max",
        "doeblin": "density floor and the implied phi_1 bound",
        "simulate": "simulate a path and write it as CSV",
        "sweep": "lag-1 coefficients over a cartesian parameter grid",
        "run": "every task enabled in the configuration",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True, help="JSON experiment configuration")
        p.add_argument("--out", default=None, help="output directory (overrides output.directory)")
        p.add_argument("--seed", type=_u64, default=None, help="simulation seed (overrides simulate.seed)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    tasks = SUBCOMMANDS[args.command]
    try:
        cfg = load_config(args.config, out=args.out, seed=args.seed, require_task=tasks is None)
        if args.command == "simulate" and cfg.sim_n is None:
            raise ConfigError("simulate.n", "is required")
        if args.command == "sweep" and not cfg.sweep:
            raise ConfigError("sweep.parameters", "is required")
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate":
        print(json.dumps({"copula": describe(cfg.copula), "label": cfg.copula.label, "tasks": list(cfg.enabled)}, indent=2))
        return EXIT_OK

    try:
        report = run_experiment(cfg, tasks)
    except NumericalFailure as exc:
        print(f"numerical failure in task {getattr(exc, 'task', '?')}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    for name, verdict in report.verdicts.items():
        print(f"{name}: {verdict}")
    for path in report.artifacts:
        print(f"wrote {path}")
    return EXIT_OK if report.passed else EXIT_VERDICT


if __name__ == "__main__":
    sys.exit(main())
