"""Acceptance criteria 1-10, each logging one PASS/FAIL line."""

import itertools
import math
import time

import numpy as np
import pytest

from conftest import random_affine_params, record_criterion, truthful_zoo
from wmonlab.curves import MonotoneCurve
from wmonlab.geometry import classify_figure, critical_profile, derivative_equality, extension_identity_residual
from wmonlab.lowerbound import AdversaryConfig, adversary, high_approx_witness, nontrivial_tasks, optimal_makespan
from wmonlab.mechanisms import (AffineMin, AntiMonotone, Bundling, Constant, CoupledAffine, AffineParams, PerPair,
                                PerTaskLinear, TaskIndependent, payments_affine, run)
from wmonlab.truthfulness import (S_PLAYER, T_PLAYER, default_probe_ceiling, lemma_tool_check, random_probes,
                                  virtual_payments, wmon_check, wmon_grid_check)
from wmonlab.valuations import Bundle, DomainSpec, Instance, Task, TwoTaskValuation, VPLUS, VSUBMOD

T = TwoTaskValuation


# 1 ------------------------------------------------------------------------

def test_criterion_01_wmon_suite():
    start = time.perf_counter()
    axis = np.linspace(0, 3, 7)
    failures = []
    for k, (name, mech) in enumerate(sorted(truthful_zoo().items())):
        domain = VPLUS if name.startswith("task_independent") else VSUBMOD
        for player in (T_PLAYER, S_PLAYER):
            count, _ = wmon_grid_check(mech, player, axis, axis, domain)
            probes = random_probes(player, 10_000 // 2, seed=1000 + 2 * k + player, domain=domain)
            rand = sum(wmon_check(mech, player, [p]) is not None for p in probes)
            if count or rand:
                failures.append((name, player, count, rand))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 60
    record_criterion(1, "WMON suite over the truthful zoo", ok, f"{elapsed:.1f}s, failures={failures}")
    assert ok


# 2 ------------------------------------------------------------------------

def test_criterion_02_virtual_payment_recovery():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        p = random_affine_params(rng)
        s = tuple(float(x) for x in rng.uniform(0, 3, 2))
        probed = virtual_payments(lambda t: AffineMin(p)(t, s), default_probe_ceiling(s) + 10)
        worst = max(worst, float(np.max(np.abs(np.subtract(probed.as_tuple(), payments_affine(p, s).as_tuple())))))
    ok = worst <= 1e-6
    record_criterion(2, "probed payments match the closed form", ok, f"max error {worst:.2e}")
    assert ok


# 3 ------------------------------------------------------------------------

def test_criterion_03_figure_classification():
    rng = np.random.default_rng(3)
    mismatches = 0
    for _ in range(100):
        p = random_affine_params(rng)
        s = tuple(float(x) for x in rng.uniform(0, 3, 2))
        pay = payments_affine(p, s)
        diff = pay.p1 - (pay.p12 - pay.p2)
        expected = "quasi-bundling" if diff < 0 else "quasi-flipping" if diff > 0 else "crossing"
        got = classify_figure(critical_profile(lambda t: AffineMin(p)(t, s), default_probe_ceiling(s) + 10))
        mismatches += got.value != expected
    ok = mismatches == 0
    record_criterion(3, "figure classes match the payment sign", ok, f"{mismatches} mismatches in 100")
    assert ok


# 4 ------------------------------------------------------------------------

def test_criterion_04_derivative_equality():
    rng = np.random.default_rng(4)
    worst, cuts, tried = 0.0, 0, 0
    while cuts < 50 and tried < 5000:
        tried += 1
        mech = AffineMin(random_affine_params(rng))
        s = tuple(float(x) for x in rng.uniform(0, 3, 2))
        reports = [derivative_equality(mech, s, d) for d in (0.25, 0.5)]
        if not all(r.both_positive for r in reports):
            continue
        cuts += 1
        worst = max(worst, *(r.residual for r in reports))
    ok = cuts == 50 and worst <= 1e-6
    record_criterion(4, "increments of f' and g' agree", ok, f"{cuts} cuts, max residual {worst:.2e}")
    assert ok


# 5 ------------------------------------------------------------------------

def test_criterion_05_lower_bound_replay():
    cfg = AdversaryConfig(delta=0.3)
    problems, slowest, worst_margin = [], 0.0, math.inf
    subjects = [("vcg", PerPair(AffineMin()))]
    subjects += [(f"per_task_linear({lam},{gam})", PerTaskLinear(lam, gam))
                 for lam in (0.5, 2, 10) for gam in (-0.2, 0, 0.2)]
    for name, mech in subjects:
        for n in (5, 10, 17):
            start = time.perf_counter()
            rep = adversary(mech, n, cfg)
            elapsed = time.perf_counter() - start
            slowest = max(slowest, elapsed)
            bound = math.sqrt(n - 1) - cfg.delta
            finished = rep.kind == "direct" or (rep.kind == "reduced"
                                                and len(nontrivial_tasks(rep.witness, cfg.delta0)) == 1)
            worst_margin = min(worst_margin, rep.ratio - bound)
            if not finished or rep.ratio < bound or elapsed >= 10 or (name == "vcg" and rep.kind != "direct"):
                problems.append((name, n, rep.kind, rep.ratio, elapsed))
    ok = not problems
    record_criterion(5, "adversary reaches sqrt(n-1) - delta", ok,
                     f"slowest {slowest:.2f}s, min margin {worst_margin:.3f}, problems={problems}")
    assert ok


# 6 ------------------------------------------------------------------------

def one_task_mechanism(t, s):
    return Bundle.ONE if t.t1 < s[0] else Bundle.EMPTY


def test_criterion_06_sqrt_b_witnesses():
    subjects = [("bundling", Bundling(MonotoneCurve.identity()))]
    subjects += [("constant", Constant(b)) for b in Bundle]
    subjects += [("degenerate-one-task", one_task_mechanism)]
    ratios = [high_approx_witness(kind, mech, 400).ratio for kind, mech in subjects]
    ok = min(ratios) >= 20
    record_criterion(6, "sqrt(B) witnesses at B = 400", ok, f"min ratio {min(ratios):.3g}")
    assert ok


# 7 ------------------------------------------------------------------------

def test_criterion_07_extension_identity():
    phi = MonotoneCurve.linear(2.0, 0.5)
    rng = np.random.default_rng(7)
    worst, samples = 0.0, 0
    while samples < 1000:
        t1, t2 = rng.uniform(0.5, 3, 2)
        t = T(float(t1), float(t2), float(rng.uniform(max(t1, t2), t1 + t2)))
        if not all(phi.in_range(y) for y in (t.t1, t.t2, t.t12 - t.t1, t.t12 - t.t2)):
            continue
        samples += 1
        worst = max(worst, extension_identity_residual(phi, phi, t))
    square = MonotoneCurve.sampled(lambda x: x * x, np.linspace(0, 1, 4001))
    bad = extension_identity_residual(square, square, T(0.25, 0.49, 0.64))
    ok = worst <= 1e-12 and bad > 0.03
    record_criterion(7, "payment identity of task-independent extensions", ok,
                     f"affine max {worst:.1e}, square {bad:.4f}")
    assert ok


# 8 ------------------------------------------------------------------------

def near_eps_probes(mech, eps, count, seed):
    """t-player probe pairs that share s and t1, straddle the task-2 threshold, and sit near the eps edge."""
    rng = np.random.default_rng(seed)
    for _ in range(count):
        s = tuple(float(x) for x in rng.uniform(0.5, 2, 2))
        phi, eta = mech.phi(s[0]), mech.eta(s[1])
        t1 = float(rng.uniform(0, phi))
        a, b = (float(eta + x) for x in rng.uniform(-eps, eps, 2))
        u, v = rng.uniform(0.8, 1.0, 2) * eps
        yield (T(t1, a, t1 + a + u), s), (T(t1, b, t1 + b - v), s)


def test_criterion_08_naive_extension_fails():
    mech = TaskIndependent(MonotoneCurve.linear(2.0, 0.5), MonotoneCurve.linear(2.0, -0.5))
    domain = DomainSpec.parse("VEps:0.1")
    found_at = None
    for k, probe in enumerate(near_eps_probes(mech, 0.1, 10_000, seed=8), start=1):
        if wmon_check(mech, T_PLAYER, [probe]) is not None:
            found_at = k
            break
    witness_ok = found_at is not None
    if witness_ok:
        (t, _), (u, _) = list(near_eps_probes(mech, 0.1, found_at, seed=8))[-1]
        witness_ok = all(abs(v.t12 - v.t1 - v.t2) <= 0.1 and v.is_monotone() for v in (t, u))
    ok = witness_ok
    record_criterion(8, "t12-ignoring extension violates WMON on VEps(0.1)", ok, f"witness at probe {found_at}")
    assert ok


# 9 ------------------------------------------------------------------------

# Loads are summed left to right in task order so that equal partitions give bit-identical makespans.

def brute_pairs(inst: Instance) -> float:
    tasks = inst.tasks()
    owners = np.array(list(itertools.product(range(inst.n), repeat=len(tasks))))
    loads = np.zeros((len(owners), inst.n))
    for m in range(1, inst.n):
        for k, task in enumerate(tasks):
            loads[:, m] += np.where(owners[:, k] == m, inst.task_cost(m, task), 0.0)
    for p, pair in enumerate(inst.t.pairs):
        code = (owners[:, 2 * p] == 0).astype(int) + 2 * (owners[:, 2 * p + 1] == 0).astype(int)
        loads[:, 0] += np.array([0.0, pair.t1, pair.t2, pair.t12])[code]
    return float(loads.max(axis=1).min())


def brute_matrix(costs: np.ndarray) -> float:
    n_m, n_t = costs.shape
    owners = np.array(list(itertools.product(range(n_m), repeat=n_t)))
    loads = np.zeros((len(owners), n_m))
    for k in range(n_t):
        for m in range(n_m):
            loads[:, m] += np.where(owners[:, k] == m, costs[m, k], 0.0)
    return float(loads.max(axis=1).min())


def test_criterion_09_optimum_oracle():
    rng = np.random.default_rng(9)
    mismatches = 0
    for k in range(100):
        n = int(rng.integers(2, 6))
        pairs = []
        for _ in range(n - 1):
            a, b = rng.uniform(0, 2, 2)
            pairs.append((float(a), float(b), float(rng.uniform(max(a, b), a + b + 1))))
        bids = [tuple(float(x) for x in rng.uniform(0, 2, 2)) for _ in range(n - 1)]
        theta = None if k % 2 else float(rng.uniform(0.1, 3))
        inst = Instance.build(n, pairs, bids, theta)
        mismatches += optimal_makespan(inst) != brute_pairs(inst)
    for _ in range(100):
        costs = rng.uniform(0, 3, (int(rng.integers(2, 4)), int(rng.integers(1, 11))))
        mismatches += optimal_makespan(costs) != brute_matrix(costs)
    ok = mismatches == 0
    record_criterion(9, "optimum matches brute-force enumeration", ok, f"{mismatches} mismatches in 200")
    assert ok


# 10 -----------------------------------------------------------------------

def lemma_perturbation(mech, inst: Instance, rng):
    machine = int(rng.integers(0, inst.n))
    won = set(run(mech, inst).tasks_of(machine))

    def scale(task):
        return rng.uniform(0.1, 0.9) if task in won else rng.uniform(1.1, 2.0)

    if machine == 0:
        pairs = []
        for i, pair in enumerate(inst.t.pairs, start=1):
            a, b = pair.t1 * scale(Task(i, False)), pair.t2 * scale(Task(i, True))
            pairs.append((a, b, a + b))
        return Instance.build(inst.n, pairs, inst.s_bids, inst.theta)
    bids = list(inst.s_bids)
    a, b = bids[machine - 1]
    bids[machine - 1] = (a * scale(Task(machine, False)), b * scale(Task(machine, True)))
    return Instance.build(inst.n, [p.as_tuple() for p in inst.t.pairs], bids, inst.theta)


def random_positive_instance(rng, n):
    pairs = [(float(a), float(b), float(a + b)) for a, b in rng.uniform(0.1, 2, (n - 1, 2))]
    bids = [tuple(float(x) for x in row) for row in rng.uniform(0.1, 2, (n - 1, 2))]
    return Instance.build(n, pairs, bids)


def test_criterion_10_lemma_tool():
    families = {name: PerPair(m) for name, m in truthful_zoo().items()}
    families["per_task_linear"] = PerTaskLinear((0.5, 2.0, 1.0, 1.5), (0.1, -0.2, 0.0, 0.05))
    families["coupled_affine"] = CoupledAffine(AffineParams(gamma12=0.3), 1, 2, (0, 0.1, -0.1, -0.3))
    rng = np.random.default_rng(10)
    names = sorted(families)
    failures = []
    for k in range(1000):
        name = names[k % len(names)]
        inst = random_positive_instance(rng, int(rng.integers(3, 6)))
        if not lemma_tool_check(families[name], inst, lemma_perturbation(families[name], inst, rng)):
            failures.append(name)
    anti = PerPair(AntiMonotone())
    tricky = Instance.build(2, [(1.05, 0.5, 1.55)], [(1.0, 1.0)])
    control = lemma_tool_check(anti, tricky, Instance.build(2, [(0.95, 0.4, 1.35)], [(1.0, 1.0)]))
    ok = not failures and control is False
    record_criterion(10, "allocation lemma holds for truthful families", ok,
                     f"failures={sorted(set(failures))}, anti-monotone control={control}")
    assert ok
