"""Command-line entry point: ``mdrc run|verify|list``."""

import argparse
import logging
import sys
from pathlib import Path

from ..errors import MdrcError
from .runner import format_summary, run_scenario, verify
from .scenario import builtin_names, load_scenario


def _parser():
    ap = argparse.ArgumentParser(prog="mdrc", description="Optimal mismatched-disturbance "
                                 "rejection: synthesis, simulation and verification.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, hlp in (("run", "simulate a scenario and write artifacts"),
                      ("verify", "run the property checks on a scenario")):
        sp = sub.add_parser(name, help=hlp)
        sp.add_argument("scenario", help="scenario file or built-in name")
        sp.add_argument("--out-dir", type=Path, default=None)
        sp.add_argument("--step", type=float, default=None, help="override the simulation step")
        sp.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    sub.add_parser("list", help="list built-in scenarios")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "list":
        for name in builtin_names():
            print(name)
        return 0
    try:
        s = load_scenario(args.scenario, args.out_dir)
        if args.command == "run":
            res = run_scenario(s, args.out_dir, args.step)
            print(format_summary(res.rows))
            print(f"artifacts in {(args.out_dir or s.out_dir) / s.name}")
            return 0
        if args.step is not None:
            s.verify["riccati_step"] = args.step
        rep = verify(s, seed=args.seed)
    except MdrcError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    for line in rep.lines():
        print(line)
    print(f"{s.name}: {'PASS' if rep.passed else 'FAIL'}")
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
