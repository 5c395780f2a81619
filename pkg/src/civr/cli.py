"""Command-line front end.

Subcommands: propagate, compare, scan-width, trajectories, eigen.
Exit codes: 0 on success, 2 on configuration errors, 3 on numerical
failures (imaginary-energy drift cap, empty contributing set,
non-convergence, grid-edge leakage).
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config
from .oracles import NumericalFailure
from .runner import (run_compare, run_eigen, run_propagate, run_scan_width,
                     run_trajectories)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _add_common(sub):
    sub.add_argument("-c", "--config", default=None,
                     help="INI config file (defaults reproduce the published "
                          "quartic benchmark)")
    sub.add_argument("-o", "--outdir", required=True, help="output directory")
    sub.add_argument("--set", dest="overrides", action="append", default=[],
                     metavar="SECTION.KEY=VALUE",
                     help="override a single config option (repeatable)")
    sub.add_argument("--workers", type=int, default=None,
                     help="override [run] workers")
    sub.add_argument("--no-figures", action="store_true",
                     help="skip figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="civr",
        description="Semiclassical wavepacket propagation with complex "
                    "trajectories in a doubled phase space.")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("propagate", help="run the propagation pipeline")
    _add_common(p)

    p = subs.add_parser("compare", help="propagate and compare to the "
                                        "split-operator oracle")
    _add_common(p)

    p = subs.add_parser("scan-width", help="scan the smoothing width against "
                                           "the oracle at one time")
    _add_common(p)
    p.add_argument("--T", type=float, default=None,
                   help="propagation time (default: last configured time)")
    p.add_argument("--a-min", type=float, default=0.3)
    p.add_argument("--a-max", type=float, default=2.0)
    p.add_argument("--steps", type=int, default=9)

    p = subs.add_parser("trajectories", help="dump trajectory time series")
    _add_common(p)
    p.add_argument("--launch", action="append", default=[], metavar="Q1,P1",
                   help="companion point to launch from (repeatable; default: "
                        "the wavepacket center)")
    p.add_argument("--stride", type=int, default=None,
                   help="keep every N-th step (default: [run] dump_stride)")

    p = subs.add_parser("eigen", help="lowest oscillator levels from the "
                                      "imaginary-time oracle")
    _add_common(p)
    p.add_argument("--states", type=int, default=3)
    return parser


def _load(args):
    overrides = list(args.overrides)
    if args.workers is not None:
        overrides.append(f"run.workers={args.workers}")
    if args.no_figures:
        overrides.append("report.figures=false")
    return load_config(args.config, overrides)


def _parse_points(items):
    points = []
    for item in items:
        try:
            qs, ps = item.split(",")
            points.append((float(qs), float(ps)))
        except ValueError:
            raise ConfigError(f"--launch expects Q1,P1 got {item!r}") from None
    return points


def main(argv=None) -> int:
    logging.basicConfig(format="[%(name)s] %(message)s", level=logging.INFO)
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "propagate":
            run_propagate(cfg, args.outdir)
        elif args.command == "compare":
            run_compare(cfg, args.outdir)
        elif args.command == "scan-width":
            T = args.T if args.T is not None else (cfg.times[-1] if cfg.times else 0.0)
            run_scan_width(cfg, args.outdir, T, args.a_min, args.a_max, args.steps)
        elif args.command == "trajectories":
            run_trajectories(cfg, args.outdir, _parse_points(args.launch),
                             stride=args.stride)
        elif args.command == "eigen":
            run_eigen(cfg, args.outdir, n_states=args.states)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
