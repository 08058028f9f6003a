"""Command-line front door.

Subcommands::

    adaptrand table1        reproduce the urn-target comparison table
    adaptrand table2        reproduce the failure-minimizing-target table
    adaptrand ecmo          rerun the 185-patient trial reanalysis
    adaptrand asymptotics   analytic proportion/variance/bound grid
    adaptrand simulate      Monte Carlo for a custom design and model
    adaptrand serve         run the live allocation HTTP service

Exit codes: 0 success, 2 usage error, 3 domain error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .designs import DesignError, parse_design
from .estimators import GaussianEstimates
from .reports import (
    DEFAULT_REPS,
    DEFAULT_SEED,
    Report,
    report_asymptotics,
    report_ecmo,
    report_simulate,
    report_table1,
    report_table2,
)
from .targets import BinaryParams, GaussianParams, TargetDomainError, parse_target
from .trial import Bernoulli, Gaussian, TrialError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_IO = 4


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help="output path (default: stdout)")


def _add_mc_flags(p: argparse.ArgumentParser, reps: int = DEFAULT_REPS, n: int | None = None) -> None:
    p.add_argument("--reps", type=int, default=reps)
    if n is not None:
        p.add_argument("--n", type=int, default=n)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--parallelism", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    root = argparse.ArgumentParser(prog="adaptrand", description=__doc__.splitlines()[0])
    sub = root.add_subparsers(dest="command", required=True)

    p = sub.add_parser("table1", help="urn-target simulation table")
    _add_mc_flags(p, n=100)
    _add_output_flags(p)

    p = sub.add_parser("table2", help="failure-minimizing-target simulation table")
    _add_mc_flags(p, n=100)
    _add_output_flags(p)

    p = sub.add_parser("ecmo", help="185-patient trial reanalysis")
    _add_mc_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("asymptotics", help="analytic variance/bound grid")
    p.add_argument("--target", required=True, help="urn|rsihr|neyman-binary|zr-gaussian|neyman-gaussian|da-optimal|fixed:<r>")
    p.add_argument("--gamma", type=float, default=2.0, help="DBCD exponent for the comparison column")
    _add_param_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("simulate", help="Monte Carlo for a custom design")
    p.add_argument("--design", required=True, help="erade:<a>|efron:<a>|dbcd:<g>|dl:<b1,b2,b0>|rpw:<b1,b2>|mrpw:<m0,b1,b2>|cr:<p>")
    p.add_argument("--target", help="target allocation for erade/dbcd")
    p.add_argument("--alpha", type=float, help="override the coin bias of erade/efron")
    p.add_argument("--gamma", type=float, help="override the dbcd exponent")
    p.add_argument("--m0", type=int, default=2, help="burn-in patients per arm")
    p.add_argument("--theta0", help="gaussian initial guess mu1,mu2,tau1,tau2")
    _add_param_flags(p)
    _add_mc_flags(p, n=100)
    _add_output_flags(p)

    p = sub.add_parser("serve", help="run the live allocation service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8432)
    p.add_argument("--journal-dir", required=True)
    p.add_argument("--token", help="require this static token on every request")

    return root


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--p1", help="binary success probability, arm 1 (comma list for a grid)")
    p.add_argument("--p2", help="binary success probability, arm 2")
    p.add_argument("--mu1", help="gaussian mean, arm 1 (comma list for a grid)")
    p.add_argument("--mu2", help="gaussian mean, arm 2")
    p.add_argument("--tau1", help="gaussian std-dev, arm 1")
    p.add_argument("--tau2", help="gaussian std-dev, arm 2")


def _floats(text: str | None) -> list[float] | None:
    if text is None:
        return None
    return [float(x) for x in text.split(",") if x != ""]


def _param_grid(args) -> list:
    """Zip the comma-separated parameter lists into a grid of points."""
    p1, p2 = _floats(args.p1), _floats(args.p2)
    mu1, mu2 = _floats(args.mu1), _floats(args.mu2)
    tau1, tau2 = _floats(args.tau1), _floats(args.tau2)
    if p1 is not None or p2 is not None:
        if p1 is None or p2 is None or len(p1) != len(p2):
            raise TrialError("need matching --p1 and --p2 lists")
        return [BinaryParams(a, b) for a, b in zip(p1, p2)]
    parts = (mu1, mu2, tau1, tau2)
    if any(x is not None for x in parts):
        if any(x is None for x in parts) or len({len(x) for x in parts}) != 1:
            raise TrialError("need matching --mu1/--mu2/--tau1/--tau2 lists")
        return [GaussianParams(a, b, c, d) for a, b, c, d in zip(mu1, mu2, tau1, tau2)]
    raise TrialError("no model parameters given (use --p1/--p2 or --mu1/--mu2/--tau1/--tau2)")


def _model_from_args(args):
    points = _param_grid(args)
    if len(points) != 1:
        raise TrialError("simulate takes exactly one parameter point")
    point = points[0]
    if isinstance(point, BinaryParams):
        return Bernoulli(point.p1, point.p2)
    return Gaussian(point.mu1, point.mu2, point.tau1, point.tau2)


def _design_from_args(args):
    text = args.design
    name = text.partition(":")[0]
    if args.alpha is not None and name in ("erade", "efron"):
        text = f"{name}:{args.alpha!r}"
    if args.gamma is not None and name == "dbcd":
        text = f"dbcd:{args.gamma!r}"
    theta0 = None
    if args.theta0:
        mu1, mu2, tau1, tau2 = (float(x) for x in args.theta0.split(","))
        theta0 = GaussianEstimates(mu1=mu1, mu2=mu2, var1=tau1**2, var2=tau2**2)
    return parse_design(text, target=args.target, m0=args.m0, initial_gaussian=theta0)


def _emit(report: Report, args) -> None:
    if args.out:
        report.write(args.out, args.format)
    else:
        sys.stdout.write(report.render(args.format))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "table1":
            _emit(report_table1(args.reps, args.n, args.seed, args.parallelism), args)
        elif args.command == "table2":
            _emit(report_table2(args.reps, args.n, args.seed, args.parallelism), args)
        elif args.command == "ecmo":
            _emit(report_ecmo(args.reps, args.seed, args.parallelism), args)
        elif args.command == "asymptotics":
            target = parse_target(args.target)
            _emit(report_asymptotics(target, _param_grid(args), gamma=args.gamma), args)
        elif args.command == "simulate":
            design = _design_from_args(args)
            model = _model_from_args(args)
            _emit(
                report_simulate(design, model, n=args.n, reps=args.reps, seed=args.seed,
                                parallelism=args.parallelism),
                args,
            )
        elif args.command == "serve":
            from .service.app import run_server

            run_server(host=args.host, port=args.port, journal_dir=args.journal_dir,
                       token=args.token)
    except (DesignError, TargetDomainError, TrialError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
