"""Makespan optimum, the adversarial witness search for linear mechanisms, and the sqrt(B) witnesses."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import config
from .errors import (BadParameters, Certificate, DegenerateOptimum, FamilyMismatch, LinearityViolation,
                     TooLarge, WMONViolation)
from .geometry import (FigureClass, boundary_scan, classify_figure, critical_profile,
                       fit_truncated_affine, task_pair_cut, _restricted_ceiling)
from .mechanisms import Allocation, NMechanism, SBid, TwoPlayerOracle, as_instance, run
from .valuations import Bundle, Instance, RestrictedInstance, TwoTaskValuation

# ---------------------------------------------------------------------------
# Optimum and ratio


def _restricted_optimum(t: Sequence[float], s: Sequence[float]) -> float:
    """Twins ride free with the t-player; task i goes to the t-player iff s_i exceeds the s-side cap."""
    best = math.inf
    for cap in [0.0, *s]:
        best = min(best, max(sum(ti for ti, si in zip(t, s) if si > cap), cap))
    return best


def _pair_optimum(inst: Instance) -> float:
    """Optimum when no task is given to a non-associated s-player."""
    options = []
    for pair, (a, b) in zip(inst.t.pairs, inst.s_bids):
        options.append([(pair.cost(bd), (a if not bd.has(1) else 0.0) + (b if not bd.has(2) else 0.0))
                        for bd in Bundle])
    caps = sorted({sc for opts in options for _, sc in opts})
    best = math.inf
    for cap in caps:
        load = sum(min(tc for tc, sc in opts if sc <= cap) for opts in options)
        best = min(best, max(load, cap))
    return best


def _search(task_costs: list[list[float]], t_pair_cost, n_machines: int, upper: float) -> float:
    """Exact branch and bound over task-to-machine maps.

    ``task_costs[k][m]`` is the cost of task k on machine m >= 1; machine 0's
    load is ``t_pair_cost(assigned task indices)``.
    """
    n_tasks = len(task_costs)
    best = [upper]
    held: list[int] = []

    # loads are rebuilt rather than undone, so each partition's makespan is a plain left-to-right sum
    def rec(k: int, loads: tuple[float, ...]) -> None:
        t_load = t_pair_cost(held)
        if max(t_load, max(loads, default=0.0)) >= best[0]:
            return
        if k == n_tasks:
            best[0] = max(t_load, max(loads, default=0.0))
            return
        held.append(k)
        rec(k + 1, loads)
        held.pop()
        for m in range(1, n_machines):
            rec(k + 1, loads[:m - 1] + (loads[m - 1] + task_costs[k][m],) + loads[m:])

    rec(0, (0.0,) * (n_machines - 1))
    return best[0]


def optimal_makespan(inst: Instance | RestrictedInstance | Sequence[Sequence[float]],
                     limit: int | None = None) -> float:
    """Exact optimum makespan.

    Accepts a pair-structured instance, a restricted instance, or an additive
    cost matrix ``costs[machine][task]``.
    """
    limit = config.OPT_TASK_LIMIT if limit is None else limit
    if isinstance(inst, RestrictedInstance):
        return _restricted_optimum(inst.t, inst.s)
    if not isinstance(inst, Instance):
        return _matrix_optimum(np.asarray(inst, dtype=float), limit)
    restricted = RestrictedInstance.from_instance(inst)
    if restricted is not None and restricted.theta >= 1.0:
        return _restricted_optimum(restricted.t, restricted.s)
    paired = _pair_optimum(inst)
    if inst.theta >= paired:
        return paired
    if inst.n_tasks > limit:
        raise TooLarge(f"{inst.n_tasks} tasks exceed the exhaustive-search cap {limit}")
    tasks = inst.tasks()
    costs = [[0.0] + [inst.task_cost(m, task) for m in range(1, inst.n)] for task in tasks]
    found = _search(costs, lambda held: inst.machine_cost(0, [tasks[k] for k in held]), inst.n, paired)
    return min(found, paired)


def _matrix_optimum(costs: np.ndarray, limit: int) -> float:
    n_machines, n_tasks = costs.shape
    if n_tasks > limit:
        raise TooLarge(f"{n_tasks} tasks exceed the exhaustive-search cap {limit}")
    per_task = [[0.0] + [float(costs[m, k]) for m in range(1, n_machines)] for k in range(n_tasks)]
    greedy = np.zeros(n_machines)
    for k in range(n_tasks):
        greedy[int(np.argmin(costs[:, k]))] += costs[int(np.argmin(costs[:, k])), k]
    found = _search(per_task, lambda held: float(sum(costs[0, k] for k in held)), n_machines,
                    float(greedy.max()))
    return min(found, float(greedy.max()))


def makespan(inst: Instance | RestrictedInstance, alloc: Allocation) -> float:
    inst = as_instance(inst)
    return max(inst.machine_cost(m, alloc.tasks_of(m)) for m in range(inst.n))


def approximation_ratio(mech: NMechanism, inst: Instance | RestrictedInstance) -> float:
    mech_span = makespan(inst, run(mech, inst))
    opt = optimal_makespan(inst)
    if opt <= config.EPS_CMP:
        # 0/0: the mechanism is optimal on an instance that costs nothing
        if mech_span <= config.EPS_CMP:
            return 1.0
        raise DegenerateOptimum("the optimum makespan is zero", mech_span)
    return mech_span / opt


# ---------------------------------------------------------------------------
# s-inefficient instances


def eq101_instance(n: int, delta: float) -> RestrictedInstance:
    """All ``t_i = 1/sqrt(n-1) - delta/n`` and all ``s_i = 1``."""
    if n < 2:
        raise BadParameters("need at least two machines")
    if not 0 <= delta < n / math.sqrt(n - 1):
        raise BadParameters(f"delta must lie in [0, n/sqrt(n-1)), got {delta}")
    alpha = 1.0 / math.sqrt(n - 1) - delta / n
    return RestrictedInstance(n, (alpha,) * (n - 1), (1.0,) * (n - 1))


def is_trivial(inst: RestrictedInstance, i: int, delta0: float) -> bool:
    return inst.s[i - 1] <= config.EPS_CMP or 0 < inst.t[i - 1] <= delta0


def nontrivial_tasks(inst: RestrictedInstance, delta0: float) -> list[int]:
    return [i for i in range(1, inst.n) if not is_trivial(inst, i, delta0)]


def is_s_inefficient(mech: NMechanism, inst: RestrictedInstance, delta0: float) -> bool:
    tasks = nontrivial_tasks(inst, delta0)
    if not tasks:
        return False
    bound = math.sqrt(inst.n - 1)
    won = run(mech, inst).t_player_pairs()
    for i in tasks:
        ti, si = inst.t[i - 1], inst.s[i - 1]
        if i in won or not (ti == 0 or si / ti > bound):
            return False
    return True


@dataclass(frozen=True)
class SearchResult:
    """Outcome of the first adversary stage: a direct witness or an s-inefficient instance."""

    kind: str
    instance: RestrictedInstance
    allocation: Allocation


def find_s_inefficient(mech: NMechanism, n: int, delta: float, delta0: float | None = None) -> SearchResult:
    delta0 = config.DELTA0 if delta0 is None else delta0
    inst = eq101_instance(n, delta)
    alloc = run(mech, inst)
    won = alloc.t_player_pairs()
    if len(won) == n - 1:
        return SearchResult("direct", inst, alloc)
    if makespan(inst, alloc) / optimal_makespan(inst) >= math.sqrt(n - 1) - delta:
        return SearchResult("direct", inst, alloc)
    if delta <= 0:
        raise BadParameters("delta = 0 leaves no room to raise the lost tasks' t values")
    alpha = inst.t[0]
    raised = alpha + delta / (2 * n)
    perturbed = RestrictedInstance(n, tuple(delta0 / 2 if i in won else raised for i in range(1, n)), inst.s,
                                   inst.theta)
    after = run(mech, perturbed)
    if after.t_player_tasks() != alloc.t_player_tasks():
        raise WMONViolation("lowering won bids and raising lost ones changed the t-player's tasks",
                            before=_instance_dict(inst), after=_instance_dict(perturbed),
                            won_before=sorted(str(t) for t in alloc.t_player_tasks()),
                            won_after=sorted(str(t) for t in after.t_player_tasks()))
    return SearchResult("s_inefficient", perturbed, after)


# ---------------------------------------------------------------------------
# One reduction step


@dataclass(frozen=True)
class TraceStep:
    step: int
    case: str
    task: int
    partner: int
    t_before: float
    t_after: float
    s_before: float
    s_after: float
    figure: str = ""
    fit: dict | None = None
    retrivialized: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in ("step", "case", "task", "partner", "t_before", "t_after",
                                             "s_before", "s_after", "figure")}
        out["fit"] = self.fit
        out["retrivialized"] = list(self.retrivialized)
        return out


def _instance_dict(inst: RestrictedInstance) -> dict:
    return {"n": inst.n, "t": list(inst.t), "s": list(inst.s)}


def _sweep(si: float, points: int = 11) -> list[float]:
    return sorted(set(np.linspace(0.0, 1.0, points).tolist()) | {float(si)})


def reduce_nontrivial(mech: NMechanism, inst: RestrictedInstance, delta0: float | None = None,
                      fit_tol: float | None = None, bisect_tol: float | None = None,
                      step: int = 1) -> tuple[RestrictedInstance, TraceStep]:
    """Make one non-trivial task trivial while the others stay with their s-players."""
    delta0 = config.DELTA0 if delta0 is None else delta0
    bisect_tol = config.BISECT_TOL if bisect_tol is None else bisect_tol
    tasks = nontrivial_tasks(inst, delta0)
    if len(tasks) < 2:
        raise BadParameters(f"reduction needs two non-trivial tasks, found {len(tasks)}")
    if not is_s_inefficient(mech, inst, delta0):
        raise BadParameters("the input instance is not s-inefficient for this mechanism")
    i, j = tasks[0], tasks[1]
    ti, si = inst.t[i - 1], inst.s[i - 1]
    tiny = delta0 / 2

    cut = task_pair_cut(mech, inst, i, j)
    figure = classify_figure(critical_profile(cut, _restricted_ceiling(inst), bisect_tol))
    fit_info = None
    if figure is not FigureClass.QUASI_BUNDLING:
        case, new = "flip", inst.with_task(i, t=tiny)
    else:
        samples = boundary_scan(mech, i, _sweep(si), inst, bisect_tol)
        psi_now = dict(samples)[float(si)]
        if psi_now <= config.EPS_CMP:
            case, new = "c", inst.with_task(i, t=tiny)
        else:
            fit = fit_truncated_affine(_refine(mech, i, inst, samples, bisect_tol), fit_tol)
            fit_info = fit.to_dict()
            if fit.gamma >= -config.EPS_CMP:
                case, new = "a", inst.with_task(i, s=0.0)
            else:
                case, new = "b", inst.with_task(i, s=min(si, -fit.gamma / fit.lam), t=tiny)

    if j in run(mech, new).t_player_pairs():
        raise LinearityViolation(f"task {j} moved to the t-player after the case-{case} change to task {i}",
                                 case=case, task=i, partner=j, before=_instance_dict(inst),
                                 after=_instance_dict(new))

    new, flipped = _retrivialize(mech, new, delta0)
    record = TraceStep(step, case, i, j, ti, new.t[i - 1], si, new.s[i - 1], figure.value, fit_info, flipped)
    return new, record


def _refine(mech: NMechanism, i: int, inst: RestrictedInstance, samples: list, bisect_tol: float,
            rounds: int = 4) -> list:
    """Add sweep points between the last zero of psi_i and the first positive sample until two are positive."""
    for _ in range(rounds):
        positive = [s for s, psi in samples if psi > config.EPS_CMP]
        if len(positive) >= 2:
            break
        zeros = [s for s, psi in samples if psi <= config.EPS_CMP and s < positive[0]]
        lo = max(zeros, default=0.0)
        extra = np.linspace(lo, positive[0], 7)[1:-1]
        samples = sorted(samples + boundary_scan(mech, i, extra, inst, bisect_tol))
    return samples


def _retrivialize(mech: NMechanism, inst: RestrictedInstance, delta0: float) -> tuple[RestrictedInstance, tuple]:
    """Drop non-trivial tasks that the t-player took to tiny values; nudge the survivors up."""
    won = run(mech, inst).t_player_pairs()
    flipped_now = [k for k in nontrivial_tasks(inst, delta0) if k in won]
    if not flipped_now:
        return inst, ()
    bound = math.sqrt(inst.n - 1)
    new = inst
    for k in sorted(flipped_now):
        new = new.with_task(k, t=delta0 / 2)
    survivors = [k for k in nontrivial_tasks(new, delta0)]
    for k in survivors:
        tk, sk = new.t[k - 1], new.s[k - 1]
        new = new.with_task(k, t=tk + min(delta0, (sk / bound - tk) / 2))
    after = run(mech, new)
    held = after.t_player_pairs()
    if any(k not in held for k in flipped_now) or any(k in held for k in survivors):
        raise WMONViolation("re-trivializing flipped tasks changed the t-player's tasks",
                            before=_instance_dict(inst), after=_instance_dict(new),
                            won_before=sorted(won), won_after=sorted(held))
    return new, tuple(sorted(flipped_now))


# ---------------------------------------------------------------------------
# The adversary


@dataclass(frozen=True)
class AdversaryConfig:
    delta: float = 0.3
    delta0: float = config.DELTA0
    fit_tol: float = config.FIT_TOL
    bisect_tol: float = config.BISECT_TOL


@dataclass
class AdversaryReport:
    n: int
    family: str
    kind: str
    witness: RestrictedInstance
    allocation: Allocation
    mech_makespan: float
    opt_makespan: float
    ratio: float
    trace: list[TraceStep] = field(default_factory=list)
    certificate: dict | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"n": self.n, "family": self.family, "kind": self.kind, "witness": _instance_dict(self.witness),
                "allocation": list(self.allocation.machines), "mech_makespan": self.mech_makespan,
                "opt_makespan": self.opt_makespan, "ratio": self.ratio,
                "trace": [s.to_dict() for s in self.trace], "certificate": self.certificate}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "family", "ratio", "steps", "certificate"])
        w.writerow([self.n, self.family, repr(self.ratio), len(self.trace),
                    "" if self.certificate is None else self.certificate["kind"]])
        w.writerow(["step", "case", "task", "partner", "t_before", "t_after", "s_before", "s_after", "figure"])
        for s in self.trace:
            w.writerow([s.step, s.case, s.task, s.partner, repr(s.t_before), repr(s.t_after),
                        repr(s.s_before), repr(s.s_after), s.figure])
        return buf.getvalue()


def _report(mech: NMechanism, n: int, kind: str, inst: RestrictedInstance, trace: list[TraceStep],
            certificate: dict | None) -> AdversaryReport:
    alloc = run(mech, inst)
    span, opt = makespan(inst, alloc), optimal_makespan(inst)
    ratio = span / opt if opt > config.EPS_CMP else math.inf
    return AdversaryReport(n, getattr(mech, "family", type(mech).__name__), kind, inst, alloc, span, opt, ratio,
                           trace, certificate)


def adversary(mech: NMechanism, n: int, cfg: AdversaryConfig | None = None) -> AdversaryReport:
    """Drive a mechanism to a witness of ratio at least sqrt(n-1) (minus the slack delta).

    Failures of truthfulness or linearity along the way end the run and are
    returned as the report's certificate.
    """
    cfg = cfg or AdversaryConfig()
    if n < 2:
        raise BadParameters("need at least two machines")
    try:
        found = find_s_inefficient(mech, n, cfg.delta, cfg.delta0)
    except Certificate as cert:
        return _report(mech, n, "certificate", eq101_instance(n, cfg.delta), [], cert.to_dict())
    if found.kind == "direct":
        return _report(mech, n, "direct", found.instance, [], None)
    inst, trace = found.instance, []
    while len(nontrivial_tasks(inst, cfg.delta0)) > 1:
        try:
            inst, step = reduce_nontrivial(mech, inst, cfg.delta0, cfg.fit_tol, cfg.bisect_tol, len(trace) + 1)
        except Certificate as cert:
            return _report(mech, n, "certificate", inst, trace, cert.to_dict())
        trace.append(step)
    return _report(mech, n, "reduced", inst, trace, None)


# ---------------------------------------------------------------------------
# sqrt(B) witnesses for one-dimensional and constant mechanisms


@dataclass(frozen=True)
class HighApproxWitness:
    kind: str
    t: TwoTaskValuation
    s: SBid
    allocation: Bundle
    makespan: float
    opt: float
    ratio: float
    unbounded: bool

    def to_dict(self) -> dict:
        return {"kind": self.kind, "t": list(self.t.as_tuple()), "s": list(self.s), "allocation": self.allocation.label,
                "makespan": self.makespan, "opt": self.opt, "ratio": self.ratio, "unbounded": self.unbounded}


def two_player_makespan(t: TwoTaskValuation, s: SBid, bundle: Bundle) -> float:
    rest = bundle.complement
    return max(t.cost(bundle), (s[0] if rest.has(1) else 0.0) + (s[1] if rest.has(2) else 0.0))


def two_player_optimum(t: TwoTaskValuation, s: SBid) -> float:
    return min(two_player_makespan(t, s, b) for b in Bundle)


def _witness(kind: str, oracle: TwoPlayerOracle, t: TwoTaskValuation, s: SBid) -> HighApproxWitness:
    bundle = oracle(t, s)
    span, opt = two_player_makespan(t, s, bundle), two_player_optimum(t, s)
    unbounded = opt <= config.EPS_CMP
    capped = config.EPS_CMP if unbounded else opt
    return HighApproxWitness(kind, t, s, bundle, span, capped, span / capped, unbounded)


def _probe_allocations(oracle: TwoPlayerOracle, root: float, big: float) -> set[Bundle]:
    values = (0.0, root, big)
    seen = set()
    for t1 in values:
        for t2 in values:
            for s1 in values:
                for s2 in values:
                    seen.add(oracle(TwoTaskValuation.additive(t1, t2), (s1, s2)))
    return seen


def high_approx_witness(kind: str, oracle: TwoPlayerOracle, B: float) -> HighApproxWitness:
    """The input on which a bundling, constant or one-task mechanism has ratio at least sqrt(B)."""
    if B <= 0:
        raise BadParameters("B must be positive")
    root = math.sqrt(B)
    seen = _probe_allocations(oracle, root, B)
    if kind == "constant":
        if len(seen) != 1:
            raise FamilyMismatch(f"allocation varies with the bids: {sorted(b.label for b in seen)}")
        t = TwoTaskValuation(root, root, 2 * root)
        fixed = oracle(t, (float(B), float(B)))
        return _witness(kind, oracle, t, (float(B), float(B)) if fixed is Bundle.EMPTY else (0.0, 0.0))
    if kind == "bundling":
        if not seen <= {Bundle.EMPTY, Bundle.BOTH}:
            raise FamilyMismatch(f"a bundling mechanism cannot output {sorted(b.label for b in seen)}")
        return _witness(kind, oracle, TwoTaskValuation(root, 0.0, root), (0.0, root))
    if kind in ("degenerate", "degenerate-one-task"):
        if Bundle.BOTH in seen or {Bundle.ONE, Bundle.TWO} <= seen:
            raise FamilyMismatch(f"a one-task mechanism cannot output {sorted(b.label for b in seen)}")
        # the task the t-player never receives is left to the s-player
        stuck = 1 if Bundle.TWO in seen else 2
        s = (root, 0.0) if stuck == 1 else (0.0, root)
        return _witness("degenerate-one-task", oracle, TwoTaskValuation(0.0, 0.0, 0.0), s)
    raise BadParameters(f"unknown mechanism kind {kind!r}")
