"""Command line entry point: ``randlandau <command> [--config PATH | --preset NAME] ...``.

Exit codes: 0 success, 2 config error, 3 guard failure, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import config as cfgmod
from .experiments import COMMANDS, GuardFailure
from .lattice import ResolutionGuardError
from .spectral import NumericalError

EXIT_OK, EXIT_CONFIG, EXIT_GUARD, EXIT_NUMERICAL = 0, 2, 3, 4


def build_parser():
    parser = argparse.ArgumentParser(prog="randlandau",
                                     description="Random Landau Hamiltonians on a magnetic torus.")
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--config", metavar="PATH", help="JSON config, or a manifest.json from an earlier run")
    src.add_argument("--preset", choices=sorted(cfgmod.PRESETS), help="built-in model preset")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
    common.add_argument("--seed", type=int, metavar="U64", help="experiment seed")
    common.add_argument("--realizations", type=int, metavar="N", help="number of disorder realizations")
    common.add_argument("--workers", type=int, metavar="N", help="worker processes (hint only)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in [*COMMANDS, "validate-config"]:
        sub.add_parser(name, parents=[common])
    return parser


def _load(args):
    if args.config:
        cfg = cfgmod.load(args.config)
    else:
        cfg = cfgmod.preset(args.preset or "desk")
    run = cfg["run"]
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise cfgmod.ConfigError("--seed must be an unsigned 64-bit integer")
        run["seed"] = args.seed
    if args.realizations is not None:
        if args.realizations < 1:
            raise cfgmod.ConfigError("--realizations must be >= 1")
        run["realizations"] = args.realizations
    if args.workers is not None:
        if args.workers < 1:
            raise cfgmod.ConfigError("--workers must be >= 1")
        run["workers"] = args.workers
    if args.out:
        cfg["output"]["directory"] = args.out
    cfgmod.validate(cfg)
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "validate-config":
            torus = cfgmod.torus_from(cfg["model"])
            torus.check_resolution()
            print(json.dumps({"valid": True, "config_hash": cfgmod.config_hash(cfg),
                              "torus": torus.describe()}, sort_keys=True))
            return EXIT_OK
        result = COMMANDS[args.command](cfg)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ResolutionGuardError, GuardFailure) as exc:
        print(f"guard failure: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (NumericalError, ArithmeticError, MemoryError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"{args.command}: wrote results to {cfg['output']['directory']}")
    if isinstance(result, dict) and "verdict" in result:
        print(f"verdict: {result['verdict']}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
