"""Command-line front end: ``qme run | validate | list``.

Exit status: 0 success, 2 configuration error, 3 numerical failure,
4 failed self-check under ``--check``.
"""
import argparse
import sys
import warnings
from pathlib import Path

from .errors import ConfigError, QMEError
from .scenario import (
    bundled_scenarios,
    load_scenario,
    resolve_scenario,
    run_checks,
    run_scenario,
)

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CHECK = 4


def _parser():
    p = argparse.ArgumentParser(prog="qme", description="Open quantum system scenarios.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario and write its outputs")
    run.add_argument("config", help="scenario file, or the name of a bundled scenario")
    run.add_argument("--check", action="store_true", help="evaluate the embedded checks")
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run.add_argument("--out", default=None, help="output directory (default: ./<name>_out)")
    val = sub.add_parser("validate", help="validate a scenario without running it")
    val.add_argument("config")
    sub.add_parser("list", help="list bundled scenarios")
    return p


def _cmd_list():
    for name, path in bundled_scenarios().items():
        print(f"{name}\t{path}")
    return 0


def _cmd_validate(args):
    scn = load_scenario(resolve_scenario(args.config))
    print(f"{scn.name}: ok")
    return 0


def _cmd_run(args):
    scn = load_scenario(resolve_scenario(args.config))
    if args.seed is not None and args.seed < 0:
        raise ConfigError("--seed: expected a non-negative integer", "seed")
    out = Path(args.out) if args.out else Path(f"{scn.name}_out")
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        result = run_scenario(scn, out, seed=args.seed)
    print(f"{scn.name}: wrote {len(result.files)} file(s) to {out} "
          f"in {result.manifest['wall_time_s']:.2f} s")
    if not args.check:
        return 0
    failed = False
    for c in run_checks(result):
        print(f"{'PASS' if c.passed else 'FAIL'} {c.kind}: {c.detail}")
        failed |= not c.passed
    return EXIT_CHECK if failed else 0


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "list":
            return _cmd_list()
        if args.command == "validate":
            return _cmd_validate(args)
        return _cmd_run(args)
    except ConfigError as e:
        print(f"config error [{e.key}]: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except QMEError as e:
        print(f"numerical error ({type(e).__name__}): {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
