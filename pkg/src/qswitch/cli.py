"""Command-line entry point: ``qswitch {check,simulate,learn,reproduce,fuzz}``.

Every invocation prints one JSON summary line on stdout.  Exit codes are
0 (success, condition holds), 1 (condition fails or a property is violated)
and 2 (invalid input, with a JSON error object on stderr).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .config import DEFAULTS, format_defaults
from .errors import BlowUpError, InvalidInputError, NoFixedPointError, QSwitchError
from .io import load_features, load_mdp
from .linear_fa import enumerate_theta_phi, solve_theta_star
from .mdp import solve_q_star
from .qlearn import StepSizeSchedule, run
from .stability import check_averaging, check_lfa_new_condition, check_melo_condition, check_qlearning

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _ranged(kind, low=None, high=None, low_open=False, high_open=False, name="value"):
    def convert(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {name}: {text!r}")
        if low is not None and (value < low or (low_open and value == low)):
            raise argparse.ArgumentTypeError(f"{name} must be {'>' if low_open else '>='} {low}")
        if high is not None and (value > high or (high_open and value == high)):
            raise argparse.ArgumentTypeError(f"{name} must be {'<' if high_open else '<='} {high}")
        return value

    return convert


_positive = _ranged(float, 0.0, low_open=True, name="positive number")
_nonneg = _ranged(float, 0.0, name="nonnegative number")
_count = _ranged(int, 1, name="positive integer")
_gamma = _ranged(float, 0.0, 1.0, high_open=True, name="gamma")
_exponent = _ranged(float, 0.5, 1.0, low_open=True, name="alpha exponent")


def _add_mdp(p, features=True):
    p.add_argument("--mdp", required=True, help="MDP JSON file")
    p.add_argument("--gamma", type=_gamma, default=None, help="override the discount factor in the MDP file")
    if features:
        p.add_argument("--features", default=None, help="feature matrix JSON (lfa only)")


def build_parser() -> argparse.ArgumentParser:
    epilog = "defaults:\n" + format_defaults()
    fmt = argparse.RawDescriptionHelpFormatter
    parser = _Parser(prog="qswitch", description="Switched-system analysis of Q-learning variants.", epilog=epilog, formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        return sub.add_parser(name, help=help_, description=help_, epilog=epilog, formatter_class=fmt)

    p = add("check", "run an algebraic stability certificate")
    p.add_argument("--variant", choices=harness.VARIANTS, required=True)
    p.add_argument("--melo", action="store_true", help="lfa: check Melo's condition instead of the row-dominance one")
    p.add_argument("--policy-set", choices=("theta", "theta_phi"), default="theta", help="lfa: policies to check (default: %(default)s)")
    p.add_argument("--delta", type=_positive, default=DEFAULTS["delta"], help="avg: averaging rate (default: %(default)s)")
    p.add_argument("--tol", type=_nonneg, default=DEFAULTS["melo_tol"], help="melo: eigenvalue margin (default: %(default)s)")
    p.add_argument("--out", default=None, help="also write the report JSON here")
    _add_mdp(p)

    p = add("simulate", "integrate the ODE model, optionally with its comparison systems")
    p.add_argument("--variant", choices=harness.VARIANTS, default="q")
    p.add_argument("--compare", action="store_true", help="also integrate upper and lower comparison systems")
    p.add_argument("--delta", type=_positive, default=DEFAULTS["delta"], help="avg: averaging rate (default: %(default)s)")
    p.add_argument("--dt", type=_positive, default=DEFAULTS["dt"], help="RK4 step (default: %(default)s)")
    p.add_argument("--t-final", type=_positive, default=DEFAULTS["t_final"], help="horizon (default: %(default)s)")
    p.add_argument("--eps", type=_positive, default=DEFAULTS["eps_offset"], help="comparison initial offset (default: %(default)s)")
    p.add_argument("--tol", type=_nonneg, default=DEFAULTS["sandwich_tol"], help="sandwich violation tolerance (default: %(default)s)")
    p.add_argument("--stride", type=_count, default=1, help="write every k-th grid point (default: %(default)s)")
    p.add_argument("--out", default="out/simulate", help="output directory (default: %(default)s)")
    _add_mdp(p)

    p = add("learn", "run a seeded stochastic learner")
    p.add_argument("--algorithm", choices=("q", "avgq", "lfa"), required=True)
    p.add_argument("--iters", type=_count, default=DEFAULTS["iterations"], help="iterations (default: %(default)s)")
    p.add_argument("--seed", type=_ranged(int, 0, name="seed"), default=DEFAULTS["seed"], help="(default: %(default)s)")
    p.add_argument("--alpha-scale", type=_positive, default=DEFAULTS["alpha_scale"], help="(default: %(default)s)")
    p.add_argument("--alpha-offset", type=_nonneg, default=DEFAULTS["alpha_offset"], help="(default: %(default)s)")
    p.add_argument("--alpha-exponent", type=_exponent, default=DEFAULTS["alpha_exponent"], help="(default: %(default)s)")
    p.add_argument("--delta", type=_positive, default=DEFAULTS["delta"], help="avgq: averaging rate (default: %(default)s)")
    p.add_argument("--noise-std", type=_nonneg, default=0.0, help="Gaussian reward noise (default: %(default)s)")
    p.add_argument("--out", default=None, help="write the run record JSON here")
    _add_mdp(p)

    p = add("reproduce", "regenerate a figure or worked example")
    p.add_argument("case", choices=harness.CASES)
    p.add_argument("--out", default="out", help="output root (default: %(default)s)")
    p.add_argument("--dt", type=_positive, default=DEFAULTS["dt"], help="(default: %(default)s)")
    p.add_argument("--t-final", type=_positive, default=DEFAULTS["t_final"], help="(default: %(default)s)")
    p.add_argument("--stride", type=_count, default=100, help="CSV row stride (default: %(default)s)")
    p.add_argument("--svg", action="store_true", help="also write plot.svg (needs matplotlib)")

    p = add("fuzz", "randomized property checks")
    p.add_argument("--kind", choices=harness.FUZZ_KINDS, required=True)
    p.add_argument("--trials", type=_count, required=True)
    p.add_argument("--seed", type=_ranged(int, 0, name="seed"), default=DEFAULTS["seed"], help="(default: %(default)s)")
    p.add_argument("--features", choices=("binary", "weighted"), default="binary", help="melo_implies_new feature family (default: %(default)s)")
    p.add_argument("--no-sandwich", action="store_true", help="skip trajectory sandwich checks")
    p.add_argument("--dt", type=_positive, default=DEFAULTS["dt"], help="(default: %(default)s)")
    p.add_argument("--t-final", type=_positive, default=DEFAULTS["t_final"], help="(default: %(default)s)")
    p.add_argument("--out", default=None, help="write the full summary JSON here")
    return parser


def _mdp(args):
    mdp = load_mdp(args.mdp)
    if args.gamma is not None:
        mdp = mdp.with_gamma(args.gamma)
    return mdp


def _features(args, required):
    if getattr(args, "features", None) is None:
        if required:
            raise InvalidInputError("--features is required for the lfa variant")
        return None
    return load_features(args.features)


def _write_json(path, payload):
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def _cmd_check(args):
    mdp = _mdp(args)
    if args.variant == "q":
        report = check_qlearning(mdp)
    elif args.variant == "avg":
        report = check_averaging(mdp, args.delta)
    else:
        phi = _features(args, True)
        policies = enumerate_theta_phi(mdp, phi) if args.policy_set == "theta_phi" else None
        if args.melo:
            report = check_melo_condition(mdp, phi, policies, tol=args.tol)
        else:
            report = check_lfa_new_condition(mdp, phi, policies)
    payload = report.to_dict()
    payload.pop("matrices", None)
    _write_json(args.out, report.to_dict())
    return (EXIT_OK if report.holds else EXIT_FAIL), {"command": "check", "variant": args.variant, **payload}


def _cmd_simulate(args):
    mdp = _mdp(args)
    phi = _features(args, args.variant == "lfa")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.compare:
        res = harness.verify_sandwich(args.variant, mdp, t_final=args.t_final, dt=args.dt, tol=args.tol, eps=args.eps, delta=args.delta, phi=phi)
        for name, tr in res.trajectories.items():
            tr.to_csv(out / f"trajectory_{name}.csv", stride=args.stride)
        summary = {"command": "simulate", "variant": args.variant, "out": str(out), **res.to_dict()}
        return (EXIT_OK if res.holds else EXIT_FAIL), summary
    original, _, _ = harness.build_systems(args.variant, mdp, delta=args.delta, phi=phi)
    from .switching import integrate

    tr = integrate(original, np.ones(original.dim), args.t_final, args.dt)
    tr.to_csv(out / "trajectory_original.csv", stride=args.stride)
    return EXIT_OK, {"command": "simulate", "variant": args.variant, "out": str(out), "final_norm": float(np.max(np.abs(tr.final)))}


def _cmd_learn(args):
    mdp = _mdp(args)
    phi = _features(args, args.algorithm == "lfa")
    reference = solve_theta_star(mdp, phi) if args.algorithm == "lfa" else solve_q_star(mdp)
    schedule = StepSizeSchedule(args.alpha_scale, args.alpha_offset, args.alpha_exponent)
    record = run(args.algorithm, mdp, reference, args.iters, args.seed, schedule, phi=phi, delta=args.delta, noise_std=args.noise_std)
    _write_json(args.out, record.to_dict())
    summary = {"command": "learn", "algorithm": args.algorithm, "seed": args.seed, "iterations": args.iters, "final_error": record.final_error}
    return EXIT_OK, summary


def _cmd_reproduce(args):
    report = harness.reproduce(args.case, args.out, t_final=args.t_final, dt=args.dt, stride=args.stride, svg=args.svg)
    ok = report.get("sandwich", {}).get("verdict", "holds") == "holds"
    summary = {"command": "reproduce", "case": args.case, "out": str(Path(args.out) / args.case)}
    for key in ("sandwich", "final_norms", "verdicts"):
        if key in report:
            summary[key] = report[key]
    if "new_condition" in report and "verdicts" not in report:
        summary["verdict"] = report["new_condition"]["verdict"]
    return (EXIT_OK if ok else EXIT_FAIL), summary


def _cmd_fuzz(args):
    summary = harness.fuzz(args.kind, args.trials, args.seed, sandwich=not args.no_sandwich, t_final=args.t_final, dt=args.dt, features=args.features)
    full = summary.to_dict()
    _write_json(args.out, full)
    line = {"command": "fuzz", "kind": args.kind, "trials": args.trials, "seed": args.seed, "passed": summary.passed, "violation_count": len(summary.violations), "violating_trials": sorted(summary.violations), "skipped": len(summary.skipped)}
    return (EXIT_OK if summary.passed else EXIT_FAIL), line


_COMMANDS = {"check": _cmd_check, "simulate": _cmd_simulate, "learn": _cmd_learn, "reproduce": _cmd_reproduce, "fuzz": _cmd_fuzz}


def _fail(kind, message, code):
    print(json.dumps({"error": kind, "message": message, "exit_code": code}), file=sys.stderr)
    return code


def dispatch(argv=None) -> int:
    """Parse ``argv`` and run one subcommand; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        return _fail("usage", str(exc), EXIT_INVALID)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        code, summary = _COMMANDS[args.command](args)
    except InvalidInputError as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_INVALID)
    except (NoFixedPointError, BlowUpError) as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_FAIL)
    except QSwitchError as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_FAIL)
    print(json.dumps(summary))
    return code


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
