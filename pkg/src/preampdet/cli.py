"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 computation failure, 3 validation
failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .kernels import DEFAULT_TOLERANCE, DetectionChainParams, KernelError
from .priors import PriorError, resolve_prior
from .retrodict import (
    ImpossibleOutcomeError,
    chain_report,
    prior_label,
    relative_count_probability,
)
from .scenarios import SCENARIOS, ScenarioConfig, ScenarioError, dump_kernel, parse_grid, run_scenario
from .sweep import SweepResult
from .validation import DEFAULT_SEED, DEFAULT_TRIALS, MIN_TRIALS, validate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_COMPUTATION = 2
EXIT_VALIDATION = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _chain_flags(parser, scenario=False):
    if scenario:
        parser.add_argument("--eta", help="efficiency grid: value, list a,b,c or start:stop:step")
        parser.add_argument("--gain", help="gain grid: value, list a,b,c or start:stop:step")
    else:
        parser.add_argument("--eta", type=float, default=1.0, help="detector efficiency")
        parser.add_argument("--gain", type=float, default=1.0, help="amplifier gain")
    parser.add_argument("--dark", type=float, default=None, help="mean dark counts per window")
    parser.add_argument("--tolerance", type=float, default=None, help="truncation tolerance")


def _prior_flags(parser, default="flat"):
    parser.add_argument(
        "--prior",
        default=default,
        help="flat, nonzero-flat, two-photon, or a one-column probability file",
    )
    parser.add_argument(
        "--cutoff", type=int, default=None, help="fixed cutoff for flat priors (default: converge)"
    )
    parser.add_argument("--outcome", type=int, default=None, help="recorded count")


def build_parser():
    parser = _Parser(prog="preampdet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("scenario", help="regenerate a figure's data table as CSV")
    p.add_argument("name", nargs="?", choices=SCENARIOS, help="scenario name")
    p.add_argument("--config", help="JSON file of scenario settings (flags override)")
    _chain_flags(p, scenario=True)
    _prior_flags(p, default=None)
    p.add_argument("--max-photons", type=int, default=None, help="fig6 histogram length - 1")
    p.add_argument("--workers", type=int, default=None, help="concurrent grid cells")
    p.add_argument("--out", help="output CSV path (default: stdout)")

    p = sub.add_parser("retrodict", help="posterior and fidelity for one outcome")
    _chain_flags(p)
    _prior_flags(p)
    p.add_argument("--out", help="output CSV path (default: stdout)")

    p = sub.add_parser("kernel", help="dump the chain kernel as CSV")
    _chain_flags(p)
    p.add_argument("--input-dim", type=int, default=11, help="number of input photon numbers")
    p.add_argument("--output-dim", type=int, default=None, help="number of count rows (default: adaptive)")
    p.add_argument("--out", help="output CSV path (default: stdout)")

    p = sub.add_parser("cost", help="count probability relative to a perfect detector")
    _chain_flags(p)
    _prior_flags(p)

    p = sub.add_parser("validate", help="Monte Carlo check of the analytic chain")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    p.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    # test hook: CELL:COUNT:DELTA perturbs one analytic probability
    p.add_argument("--inject-fault", help=argparse.SUPPRESS)
    return parser


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _params(args):
    return DetectionChainParams(
        gain=args.gain, efficiency=args.eta, dark_mean=args.dark or 0.0
    )


def _tolerance(args):
    return DEFAULT_TOLERANCE if args.tolerance is None else args.tolerance


def cmd_scenario(args):
    overrides = dict(
        scenario=args.name,
        efficiency_grid=parse_grid(args.eta) if args.eta is not None else None,
        gain_grid=parse_grid(args.gain) if args.gain is not None else None,
        dark_mean=args.dark,
        prior=args.prior,
        cutoff=args.cutoff,
        outcome=args.outcome,
        tolerance=args.tolerance,
        max_photons=args.max_photons,
        output=args.out,
        workers=args.workers,
    )
    if args.config:
        config = ScenarioConfig.from_file(args.config, **overrides)
    else:
        if args.name is None:
            raise UsageError("scenario needs a name or --config")
        config = ScenarioConfig(**{k: v for k, v in overrides.items() if v is not None})
    result = run_scenario(config)
    if not config.output:
        sys.stdout.write(result.to_csv())
    failed = result.failed
    if failed:
        print(f"{len(failed)} grid cell(s) failed", file=sys.stderr)
        return EXIT_COMPUTATION
    return EXIT_OK


def cmd_retrodict(args):
    prior = resolve_prior(args.prior, args.cutoff)
    outcome = 0 if args.outcome is None else args.outcome
    params = _params(args)
    report = chain_report(prior, params, outcome, _tolerance(args))
    rows = [[m, float(p)] for m, p in enumerate(report.posterior)]
    result = SweepResult(
        ["m", "posterior"],
        rows,
        {
            "eta": params.efficiency,
            "gain": params.gain,
            "dark_mean": params.dark_mean,
            "prior": prior_label(prior),
            "cutoff": report.cutoff,
            "outcome": outcome,
            "fidelity": report.fidelity,
            "count_probability": report.count_probability,
            "posterior_mean": report.posterior_mean,
            "tolerance": _tolerance(args),
            "version": __version__,
        },
    )
    _emit(result.to_csv(), args.out)
    return EXIT_OK


def cmd_kernel(args):
    _, text = dump_kernel(_params(args), args.input_dim, args.output_dim, _tolerance(args))
    _emit(text, args.out)
    return EXIT_OK


def cmd_cost(args):
    prior = resolve_prior(args.prior, args.cutoff)
    outcome = 0 if args.outcome is None else args.outcome
    params = _params(args)
    ratio = relative_count_probability(prior, params, outcome, _tolerance(args))
    report = chain_report(prior, params, outcome, _tolerance(args))
    print(f"relative_probability: {ratio:.17g}")
    print(f"fidelity: {report.fidelity:.17g}")
    print(f"count_probability: {report.count_probability:.17g}")
    return EXIT_OK


def cmd_validate(args):
    if args.trials < MIN_TRIALS:
        raise UsageError(f"--trials must be at least {MIN_TRIALS}, got {args.trials}")
    fault = None
    if args.inject_fault:
        try:
            cell, count, delta = args.inject_fault.split(":")
            fault = (int(cell), int(count), float(delta))
        except ValueError:
            raise UsageError("--inject-fault expects CELL:COUNT:DELTA") from None
    report = validate(args.seed, args.trials, args.tolerance, fault=fault)
    print(report.table())
    return EXIT_OK if report.passed else EXIT_VALIDATION


COMMANDS = {
    "scenario": cmd_scenario,
    "retrodict": cmd_retrodict,
    "kernel": cmd_kernel,
    "cost": cmd_cost,
    "validate": cmd_validate,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ScenarioError, PriorError) as exc:
        print(f"preampdet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"preampdet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (KernelError, ImpossibleOutcomeError, ArithmeticError, ValueError) as exc:
        print(f"preampdet: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTATION


if __name__ == "__main__":
    sys.exit(main())
