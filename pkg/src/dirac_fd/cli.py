"""``dirac-fd`` command line.

    dirac-fd run CONFIG [--out DIR] [--jobs N] [--allow-unstable] [--no-cache]
    dirac-fd stability --scheme S --epsilon E --h H [--v0 X] [--a10 Y] [--tau T]

Exit status: 0 on success, 2 on invalid input, 3 if any study cell Failed.
"""
from __future__ import annotations

import argparse
import math
import sys

from .config import ConfigError, eval_number, parse_config
from .core import Discretization
from .outputs import emit_outputs, table_text
from .reference import ReferenceCache
from .schemes import SchemeKind
from .stability import amplification_spectrum, empirical_tau_max, tau_max_closed_form
from .study import default_jobs, run_study

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 2, 3


def _number(text):
    try:
        return eval_number(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dirac-fd", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a study described by a config file")
    run.add_argument("config")
    run.add_argument("--out", default=".", help="output directory (default: current)")
    run.add_argument("--jobs", type=int, default=None, help="worker processes (default: CPUs)")
    run.add_argument("--allow-unstable", action="store_true",
                     help="run cells beyond the stability bound and detect divergence instead")
    run.add_argument("--no-cache", action="store_true", help="recompute reference solutions")
    run.add_argument("--quiet", action="store_true")

    st = sub.add_parser("stability", help="closed-form and mode-scan stability bounds")
    st.add_argument("--scheme", required=True)
    st.add_argument("--epsilon", required=True, type=_number)
    st.add_argument("--h", required=True, type=_number)
    st.add_argument("--v0", type=_number, default=0.0)
    st.add_argument("--a10", type=_number, default=0.0)
    st.add_argument("--tau", type=_number, default=None, help="also scan the modes at this step")
    st.add_argument("--length", type=_number, default=2.0, help="domain length (default 2)")
    return p


def _cmd_run(args) -> int:
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"dirac-fd: cannot read config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        config = parse_config(text)
    except ConfigError as exc:
        print(f"dirac-fd: {args.config}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.jobs is not None and args.jobs < 1:
        print("dirac-fd: --jobs must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    log = None if args.quiet else (lambda msg: print(msg, file=sys.stderr, flush=True))
    outcome = run_study(config, cache=ReferenceCache(enabled=not args.no_cache),
                        jobs=args.jobs or default_jobs(), allow_unstable=args.allow_unstable, log=log)
    for path in emit_outputs(outcome, args.out):
        print(path)
    if outcome.table is not None and not args.quiet:
        print(table_text(outcome.table), end="")
    return EXIT_FAILED if outcome.any_failed else EXIT_OK


def _fmt(x: float) -> str:
    return "unbounded" if math.isinf(x) else f"{x:.6e}"


def _cmd_stability(args) -> int:
    try:
        kind = SchemeKind.parse(args.scheme)
        M = round(args.length / args.h)
        if abs(M * args.h - args.length) > 1e-9 * args.length:
            raise ValueError("length/h must be an even integer")
        tau = args.tau if args.tau is not None else 1.0
        disc = Discretization(a=0.0, b=args.length, M=M, tau=tau, T=tau, epsilon=args.epsilon)
    except ValueError as exc:
        print(f"dirac-fd: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(f"scheme        {kind.value}")
    print(f"tau_max       {_fmt(tau_max_closed_form(kind, disc.epsilon, disc.h, args.v0, args.a10))}")
    print(f"mode scan     {_fmt(empirical_tau_max(kind, disc, args.v0, args.a10))}")
    if args.tau is not None:
        rep = amplification_spectrum(kind, disc, args.v0, args.a10)
        print(f"at tau={args.tau:.6g}: max |xi| = {rep.max_amplification:.12f} at mode "
              f"{rep.critical_mode} ({'stable' if rep.stable else 'unstable'})")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_stability(args)


if __name__ == "__main__":
    sys.exit(main())
