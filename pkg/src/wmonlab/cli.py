"""Command-line front end.

Exit codes: 0 when the checked property holds, 2 when it is violated (the
report carries the witness or certificate), 1 on usage or input errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import config
from .errors import (Certificate, FamilyMismatch, InsufficientSamples, WmonlabError)
from .geometry import classify_figure, critical_profile, extension_identity_residual, boundary_scan, \
    fit_truncated_affine
from .lowerbound import (AdversaryConfig, AdversaryReport, adversary, eq101_instance, high_approx_witness,
                         makespan, optimal_makespan, two_player_makespan, two_player_optimum)
from .mechanisms import AffineMin, CoupledAffine, PerPair, PerTaskLinear, lift, run
from .serialization import curve_from_json, instance_from_json, load_json, mechanism_from_json
from .truthfulness import (S_PLAYER, T_PLAYER, cut_restriction, default_probe_ceiling, random_probes,
                           virtual_payments, wmon_check, wmon_grid_check)
from .valuations import DomainSpec, RestrictedInstance, TwoTaskValuation, VPLUS, VSUBMOD

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Rendering


def _plain(x: Any) -> Any:
    """Make a report JSON-safe: infinities become strings, numpy scalars become floats."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        x = x.item()
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def render_report(report: dict | AdversaryReport, fmt: str = "json") -> str:
    if fmt not in ("json", "csv"):
        raise UsageError(f"unknown format {fmt!r}")
    if isinstance(report, AdversaryReport):
        return json.dumps(_plain(report.to_dict()), sort_keys=True) if fmt == "json" else report.to_csv()
    data = _plain(report)
    if fmt == "json":
        return json.dumps(data, sort_keys=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    keys = sorted(data)
    w.writerow(keys)
    w.writerow([json.dumps(data[k], sort_keys=True) if isinstance(data[k], (dict, list)) else data[k]
                for k in keys])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Argument helpers


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` inclusive of stop; a comma list is also accepted."""
    if ":" not in text:
        return parse_floats(text)
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise UsageError(f"grid must look like start:stop:step, got {text!r}") from exc
    if step <= 0 or stop < start:
        raise UsageError(f"grid {text!r} needs step > 0 and stop >= start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 12) for k in range(count)]


def parse_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def _two_player(mech):
    if isinstance(mech, (PerTaskLinear, CoupledAffine, PerPair)):
        raise UsageError(f"{mech.family} is an n-machine mechanism; this command needs a two-player one")
    return mech


def _load_mech(args):
    try:
        return mechanism_from_json(load_json(args.mech))
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read mechanism: {exc}") from exc


def _load_instance(path: str):
    try:
        return instance_from_json(load_json(path))
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read instance: {exc}") from exc


def _base_restricted(args) -> RestrictedInstance:
    if args.instance:
        restricted = RestrictedInstance.from_instance(_load_instance(args.instance))
        if restricted is None:
            raise UsageError("the instance does not have the restricted shape")
        return restricted
    return eq101_instance(args.n, args.delta)


def _valuation(text: str) -> TwoTaskValuation:
    vals = parse_floats(text)
    if len(vals) == 2:
        return TwoTaskValuation.additive(*vals)
    if len(vals) != 3:
        raise UsageError("--t takes t1,t2 or t1,t2,t12")
    return TwoTaskValuation(*vals)


def _sbid(text: str) -> tuple[float, float]:
    vals = parse_floats(text)
    if len(vals) != 2:
        raise UsageError("--s takes s1,s2")
    return vals[0], vals[1]


# ---------------------------------------------------------------------------
# Subcommands; each returns (report, exit code)


def cmd_eval(args):
    mech = _load_mech(args)
    if args.instance:
        inst = _load_instance(args.instance)
        alloc = run(lift(mech), inst)
        span, opt = makespan(inst, alloc), optimal_makespan(inst)
        return {"allocation": list(alloc.machines), "makespan": span, "opt": opt,
                "ratio": span / opt if opt > config.EPS_CMP else math.inf}, EXIT_OK
    if args.t is None or args.s is None:
        raise UsageError("eval needs --instance, or --t and --s")
    t, s = _valuation(args.t), _sbid(args.s)
    bundle = _two_player(mech)(t, s)
    return {"allocation": bundle.label, "makespan": two_player_makespan(t, s, bundle),
            "opt": two_player_optimum(t, s)}, EXIT_OK


def _default_domain(mech) -> DomainSpec:
    return VPLUS if getattr(mech, "family", "") == "task_independent" else VSUBMOD


def cmd_wmon_check(args):
    mech = _load_mech(args)
    if isinstance(mech, (PerTaskLinear, CoupledAffine)):
        base = _load_instance(args.instance) if args.instance else eq101_instance(args.n, 0.0).to_instance()
        oracle = cut_restriction(mech, args.pair, base)
    else:
        oracle = mech
    domain = DomainSpec.parse(args.domain) if args.domain else _default_domain(mech)
    players = {"t": [T_PLAYER], "s": [S_PLAYER], "both": [T_PLAYER, S_PLAYER]}[args.player]
    axis = parse_grid(args.grid)
    violations, witness = 0, None
    for player in players:
        count, first = wmon_grid_check(oracle, player, axis, axis, domain)
        violations += count
        witness = witness or first
    if args.random:
        if args.seed is None:
            raise UsageError("randomized probes require --seed")
        for player in players:
            probes = random_probes(player, args.random, args.seed + player, max(axis) or 1.0, domain)
            for probe in probes:
                found = wmon_check(oracle, player, [probe])
                if found is not None:
                    violations += 1
                    witness = witness or found
    report: dict = {"violations": violations}
    if witness is not None:
        report["witness"] = witness.to_dict()
    return report, EXIT_VIOLATION if violations else EXIT_OK


def _ceiling(args, s) -> float:
    return args.ceiling if args.ceiling else default_probe_ceiling(s)


def cmd_payments(args):
    mech = _two_player(_load_mech(args))
    s = _sbid(args.s)
    p = virtual_payments(lambda t: mech(t, s), _ceiling(args, s), args.bisect_tol)
    report = {"p_empty": 0.0, "p1": p.p1, "p2": p.p2, "p12": p.p12}
    if isinstance(mech, AffineMin):
        closed = mech.payments(s)
        report["closed_form"] = {"p1": closed.p1, "p2": closed.p2, "p12": closed.p12}
    return report, EXIT_OK


def cmd_classify(args):
    mech = _two_player(_load_mech(args))
    s = _sbid(args.s)
    cp = critical_profile(lambda t: mech(t, s), _ceiling(args, s), args.bisect_tol)
    return {"figure": classify_figure(cp).value, **cp.to_dict()}, EXIT_OK


def cmd_fit_boundary(args):
    mech = lift(_load_mech(args))
    base = _base_restricted(args)
    samples = boundary_scan(mech, args.task, parse_grid(args.sweep), base, args.bisect_tol)
    try:
        fit = fit_truncated_affine(samples, args.fit_tol)
    except InsufficientSamples as exc:
        raise UsageError(str(exc)) from exc
    except Certificate as cert:
        return {"linear": False, "certificate": cert.to_dict()}, EXIT_VIOLATION
    return {"linear": True, **fit.to_dict(), "samples": [list(p) for p in samples]}, EXIT_OK


def cmd_identity_residual(args):
    try:
        phi, eta = curve_from_json(load_json(args.phi)), curve_from_json(load_json(args.eta))
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read curve: {exc}") from exc
    residual = extension_identity_residual(phi, eta, _valuation(args.t))
    holds = residual <= args.identity_tol
    return {"residual": residual, "holds": holds}, EXIT_OK if holds else EXIT_VIOLATION


def cmd_adversary(args):
    mech = lift(_load_mech(args))
    cfg = AdversaryConfig(args.delta, args.delta0, args.fit_tol, args.bisect_tol)
    report = adversary(mech, args.n, cfg)
    return report, EXIT_VIOLATION if report.certificate is not None else EXIT_OK


def cmd_high_approx(args):
    mech = _two_player(_load_mech(args))
    try:
        witness = high_approx_witness(args.kind, mech, args.B)
    except FamilyMismatch as exc:
        raise UsageError(str(exc)) from exc
    report = witness.to_dict()
    report["certified"] = witness.ratio >= math.sqrt(args.B) - config.EPS_CMP
    return report, EXIT_OK if report["certified"] else EXIT_VIOLATION


COMMANDS = {
    "eval": cmd_eval, "wmon-check": cmd_wmon_check, "payments": cmd_payments, "classify": cmd_classify,
    "fit-boundary": cmd_fit_boundary, "identity-residual": cmd_identity_residual, "adversary": cmd_adversary,
    "high-approx": cmd_high_approx,
}


def build_parser() -> argparse.ArgumentParser:
    shared = _Parser(add_help=False)
    shared.add_argument("--eps", type=float, default=config.EPS_CMP, help="comparison tolerance")
    shared.add_argument("--fit-tol", type=float, default=config.FIT_TOL)
    shared.add_argument("--bisect-tol", type=float, default=config.BISECT_TOL)
    shared.add_argument("--seed", type=int, default=None)
    shared.add_argument("--format", default="json", help="json or csv")
    shared.add_argument("--out", default=None, help="write the report here instead of standard output")

    parser = _Parser(prog="wmonlab", description="Truthful two-task mechanisms and the linear lower bound.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("eval", parents=[shared], help="allocate one instance")
    p.add_argument("--mech", required=True)
    p.add_argument("--instance")
    p.add_argument("--t")
    p.add_argument("--s")

    p = sub.add_parser("wmon-check", parents=[shared], help="search for weak-monotonicity violations")
    p.add_argument("--mech", required=True)
    p.add_argument("--grid", default="0:3:0.5")
    p.add_argument("--random", type=int, default=0, help="number of extra seeded random probes")
    p.add_argument("--player", choices=("t", "s", "both"), default="both")
    p.add_argument("--domain", help="e.g. V, VPlus, VSubmod, VEps:0.1")
    p.add_argument("--instance", help="fixed instance for n-machine mechanisms")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--pair", type=int, default=1)

    for name, helptext in (("payments", "recover virtual payments"), ("classify", "classify the region figure")):
        p = sub.add_parser(name, parents=[shared], help=helptext)
        p.add_argument("--mech", required=True)
        p.add_argument("--s", required=True)
        p.add_argument("--ceiling", type=float, default=None)

    p = sub.add_parser("fit-boundary", parents=[shared], help="fit psi_i(s_i) by a truncated affine map")
    p.add_argument("--mech", required=True)
    p.add_argument("--task", type=int, default=1)
    p.add_argument("--sweep", default="0:1:0.1")
    p.add_argument("--instance")
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--delta", type=float, default=0.3)

    p = sub.add_parser("identity-residual", parents=[shared], help="payment identity of a task-independent rule")
    p.add_argument("--phi", required=True)
    p.add_argument("--eta", required=True)
    p.add_argument("--t", required=True)
    p.add_argument("--identity-tol", type=float, default=1e-12)

    p = sub.add_parser("adversary", parents=[shared], help="build a high-ratio witness instance")
    p.add_argument("--mech", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta", type=float, default=0.3)
    p.add_argument("--delta0", type=float, default=config.DELTA0)

    p = sub.add_parser("high-approx", parents=[shared], help="sqrt(B) witness for degenerate families")
    p.add_argument("--mech", required=True)
    p.add_argument("--kind", required=True, choices=("bundling", "constant", "degenerate-one-task"))
    p.add_argument("--B", type=float, default=400.0)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    saved = config.EPS_CMP
    config.EPS_CMP = args.eps
    try:
        if args.format not in ("json", "csv"):
            raise UsageError(f"unknown format {args.format!r}; use json or csv")
        report, code = COMMANDS[args.command](args)
        text = render_report(report, args.format)
    except (UsageError, WmonlabError, ValueError) as exc:
        print(f"wmonlab {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        config.EPS_CMP = saved
    if args.out:
        Path(args.out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
