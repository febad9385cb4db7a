"""Command-line front end: ``invopt {synthesize,verify,simulate,examples}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import registry
from .expr import Domain, ParseError
from .model import Case, ModelError, case_reasons, cost_for, load_system, parse_case
from .plot import write_svg
from .sim import SimConfig, simulate_result, write_csv
from .synth import SynthesisError, default_domain, synthesize, value_string
from .verify import verify_all

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_PARTIAL = 2
EXIT_UNSUPPORTED = 3
EXIT_DIVERGED = 4
EXIT_USAGE = 64


class UsageError(Exception):
    """Bad flags or an unreadable input file (exit 64)."""


class Unsupported(Exception):
    """The requested synthesis does not apply to the system (exit 3)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_source(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--system", type=Path, help="system description file (TOML or JSON)")
    src.add_argument("--example", help="built-in example name (see `examples list`)")
    p.add_argument("--case", default=None, help="auto, I, Ib, II, III or third (default: auto)")
    p.add_argument("--domain", default=None, help="sampling box, e.g. x1=-2:2,x2=-2:2")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="invopt", description="Inverse optimal control synthesis and verification.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synthesize", help="derive u, V and L for a system")
    _add_source(p)
    p.add_argument("--out", type=Path, help="write the result as JSON")

    p = sub.add_parser("verify", help="numerically check a synthesized controller")
    _add_source(p)
    p.add_argument("--resolution", type=int, default=None, help="grid points per axis")
    p.add_argument("--seed", type=int, default=0, help="seed for random initial conditions")
    p.add_argument("--dt", type=float, default=1e-2, help="RK4 step for trajectory checks")
    p.add_argument("--tmax", type=float, default=30.0, help="horizon for trajectory checks")
    p.add_argument("--out", type=Path, help="write the report as JSON")

    p = sub.add_parser("simulate", help="simulate the closed loop and write CSV/SVG")
    _add_source(p)
    p.add_argument("--x0", action="append", required=True, help="initial state a,b[,c]; repeatable")
    p.add_argument("--dt", type=float, default=SimConfig.dt, help="RK4 step")
    p.add_argument("--tmax", type=float, default=SimConfig.t_max, help="horizon")
    p.add_argument("--out", type=Path, help="CSV path; the phase plot goes next to it as .svg")
    p.add_argument("--stride", type=int, default=1, help="write every N-th step to the CSV")

    p = sub.add_parser("examples", help="list or re-derive the built-in examples")
    p.add_argument("action", choices=("list", "run-all"))
    p.add_argument("--seed", type=int, default=0, help="seed for random initial conditions")
    return parser


# --------------------------------------------------------------------------
# shared plumbing


def _load(args):
    """Return ``(system, cost, domain, pd_region, label)`` for the chosen source."""
    try:
        requested = parse_case(args.case)
    except ModelError as exc:
        raise UsageError(str(exc)) from None
    if args.example is not None:
        try:
            entry = registry.get(args.example)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
        if requested is not None and requested is not entry.cost.case:
            raise UsageError(f"example {entry.name} is defined for case {entry.cost.case}")
        system, cost, domain, pd_region = entry.system, entry.cost, entry.resolved_domain(), entry.pd_region
        label = entry.name
    else:
        try:
            problem = load_system(args.system)
        except (ModelError, ParseError) as exc:
            raise UsageError(str(exc)) from None
        system, domain, pd_region, label = problem.system, problem.domain, None, str(args.system)
        case = requested or problem.case
        try:
            if case is None:
                case = problem.auto_case()
        except ModelError as exc:
            raise Unsupported(str(exc)) from None
        if case is not Case.THIRD:
            if system.order != 2:
                raise Unsupported(f"case {case} needs a second-order system")
            why = case_reasons(system)[case]
            if why is not None:
                raise Unsupported(f"case {case}: {why}")
        elif system.order != 3:
            raise Unsupported("third-order synthesis needs a third-order system")
        try:
            cost = cost_for(case, problem.cost_table)
        except (ModelError, ParseError, ValueError) as exc:
            raise UsageError(str(exc)) from None
    if args.domain is not None:
        try:
            domain = Domain.parse(args.domain)
        except ValueError as exc:
            raise UsageError(f"bad --domain: {exc}") from None
        if domain.dim != system.order:
            raise UsageError(f"--domain has {domain.dim} axes, system has {system.order} states")
    return system, cost, domain or default_domain(system.order), pd_region, label


def _synthesize(system, cost, domain, pd_region):
    try:
        return synthesize(system, cost, domain, pd_region)
    except SynthesisError as exc:
        raise Unsupported(str(exc)) from None


def _print_result(result) -> None:
    print(f"case: {result.case}")
    print(f"u = {result.u}")
    print(f"V = {value_string(result.V)}")
    print(f"L = {result.L}")
    for c in result.conditions:
        print(f"  [{c.status}] {c.name}: {c.description}")
    for note in result.notes:
        print(f"  note: {note}")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _parse_x0(text: str, n: int) -> np.ndarray:
    try:
        x0 = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise UsageError(f"bad --x0 {text!r}: expected comma-separated numbers") from None
    if x0.size != n or not np.all(np.isfinite(x0)):
        raise UsageError(f"--x0 {text!r} must have {n} finite components")
    return x0


# --------------------------------------------------------------------------
# commands


def cmd_synthesize(args) -> int:
    system, cost, domain, pd_region, _ = _load(args)
    result = _synthesize(system, cost, domain, pd_region)
    _print_result(result)
    if args.out:
        _write_json(args.out, result.to_dict())
    return EXIT_OK


def cmd_verify(args) -> int:
    system, cost, domain, pd_region, _ = _load(args)
    result = _synthesize(system, cost, domain, pd_region)
    try:
        cfg = SimConfig(dt=args.dt, t_max=args.tmax)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.resolution is not None and args.resolution < 3:
        raise UsageError("--resolution must be at least 3")
    try:
        report = verify_all(system, result, domain, args.resolution, args.seed, cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(report.to_text())
    if args.out:
        _write_json(args.out, report.to_dict())
    return report.exit_code


def cmd_simulate(args) -> int:
    system, cost, domain, pd_region, label = _load(args)
    x0s = np.stack([_parse_x0(t, system.order) for t in args.x0], axis=1)
    if args.stride < 1:
        raise UsageError("--stride must be positive")
    try:
        cfg = SimConfig(dt=args.dt, t_max=args.tmax)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = _synthesize(system, cost, domain, pd_region)
    trajs = simulate_result(result, x0s, cfg)
    for x0, traj in zip(x0s.T, trajs):
        start = ", ".join(f"{v:g}" for v in x0)
        end = ", ".join(f"{v:.6g}" for v in traj.final_state)
        state = "diverged" if traj.diverged else ("converged" if traj.converged_to is not None else "running")
        print(f"x0 = ({start}): t = {traj.times[-1]:.6g}, x = ({end}), cost = {traj.cost_integral:.9g}, {state}")
    if args.out:
        out = Path(args.out)
        if len(trajs) == 1:
            write_csv(out, trajs[0], args.stride)
        else:
            for i, traj in enumerate(trajs, 1):
                write_csv(out.with_name(f"{out.stem}_{i}{out.suffix or '.csv'}"), traj, args.stride)
        write_svg(out.with_suffix(".svg"), trajs, result, title=label)
    if any(t.diverged for t in trajs):
        print("error: closed loop diverged", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_examples(args) -> int:
    if args.action == "list":
        for e in registry.REGISTRY:
            print(f"{e.name:20s} case {str(e.cost.case):5s} expected {e.expected_overall:7s} {e.source}")
        return EXIT_OK
    failures = 0
    for e in registry.REGISTRY:
        result = synthesize(e.system, e.cost, None, e.pd_region)
        comparisons = registry.compare_entry(e, result)
        report = verify_all(e.system, result, e.resolved_domain(), seed=args.seed)
        matched = all(c.match for c in comparisons)
        ok = matched and report.overall == e.expected_overall
        failures += not ok
        how = ",".join(f"{c.field}:{c.method or 'MISMATCH'}" for c in comparisons)
        print(f"{'ok' if ok else 'FAIL':4s} {e.name:20s} {how:40s} verify {report.overall} "
              f"(expected {e.expected_overall})")
        for c in comparisons:
            if not c.match:
                print(f"     {c.field}: expected {c.expected}")
                print(f"     {c.field}: got      {c.actual}")
                for line in c.diff:
                    print(f"       {line}")
    total = len(registry.REGISTRY)
    print(f"{total - failures}/{total} match")
    return EXIT_OK if failures == 0 else EXIT_FAIL


COMMANDS = {"synthesize": cmd_synthesize, "verify": cmd_verify, "simulate": cmd_simulate, "examples": cmd_examples}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Unsupported as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
