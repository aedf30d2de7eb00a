"""
Command line entry point.

    reactive-ro validate --config FILE
    reactive-ro run      --config FILE --out DIR [--frozen-concentration]
    reactive-ro sweep    --config FILE --out DIR --kinetics 1e-10,1e-5,1e-2,1e-1

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

import argparse
import logging
import sys
from dataclasses import replace

from .config import load_config
from .errors import ConfigError, CouplingError, SolverError

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _kinetics(text):
    try:
        values = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not values or any(v < 0 for v in values):
        raise argparse.ArgumentTypeError("need at least one non-negative rate constant")
    return values


def build_parser():
    p = _Parser(prog="reactive-ro", description="Reverse-osmosis channel with a reactive membrane")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name, text in (("validate", "check a config file"), ("run", "run one simulation"),
                       ("sweep", "run one simulation per rate constant")):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", required=True, help="INI config file")
        if name != "validate":
            sp.add_argument("--out", required=True, help="output directory")
            sp.add_argument("--frozen-concentration", action="store_true",
                            help="freeze concentrations at their initial values")
        if name == "sweep":
            sp.add_argument("--kinetics", type=_kinetics, required=True,
                            help="comma-separated rate constants [m^3/(mol s)]")
    return p


def main(argv=None):
    from .driver import run, sweep

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "validate":
        print(f"{args.config}: ok ({len(cfg.species)} species, {len(cfg.reactions)} reactions, "
              f"Re = {cfg.reynolds():.6g})")
        return EXIT_OK
    if args.frozen_concentration:
        cfg = replace(cfg, frozen_concentration=True)
    try:
        if args.command == "run":
            res = run(cfg, args.out, keep_simulation=False)
            print(f"done: t = {res.final.t:.6g} s, mean porosity {res.final.eps_mean:.6g}, "
                  f"{res.wall_time:.1f} s wall")
        else:
            results = sweep(cfg, args.kinetics, args.out, keep_simulation=False)
            failed = [K for K, r, _ in results if r is None]
            for K, r, msg in results:
                print(f"K = {K:g}: " + (f"mean porosity {r.final.eps_mean:.6g}" if r else f"failed ({msg})"))
            if failed:
                return EXIT_RUNTIME
    except (SolverError, CouplingError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
