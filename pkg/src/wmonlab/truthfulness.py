"""Weak-monotonicity checks, virtual-payment recovery and the two allocation lemmas.

Player 0 is the t-player (three-entry bids), player 1 the additive s-player.
A probe is a pair of bid profiles ``((t, s), (t', s'))`` in which only the
named player's bid may differ.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from . import config
from .errors import AssumptionViolated, BadPerturbation, BadProbe
from .mechanisms import (Allocation, NMechanism, SBid, TwoPlayerOracle, VirtualPayments, as_instance)
from .valuations import (Bundle, DomainSpec, Instance, RestrictedInstance, TwoTaskValuation, V, domain_check)

Profile = tuple[TwoTaskValuation, SBid]
Probe = tuple[Profile, Profile]
AllocAtS = Callable[[TwoTaskValuation], Bundle]

T_PLAYER, S_PLAYER = 0, 1

__all__ = ["ViolationWitness", "VirtualPayments", "wmon_check", "wmon_grid_check", "grid_probes",
           "random_probes", "virtual_payments", "default_probe_ceiling", "verify_payment_truthfulness",
           "cut_restriction", "lemma_tool_check"]


@dataclass(frozen=True)
class ViolationWitness:
    player: int
    bid: tuple[float, ...]
    bid_prime: tuple[float, ...]
    opponent: tuple[float, ...]
    alloc: Bundle
    alloc_prime: Bundle
    lhs: float
    rhs: float

    def to_dict(self) -> dict:
        return {"player": "t" if self.player == T_PLAYER else "s", "bid": list(self.bid),
                "bid_prime": list(self.bid_prime), "opponent": list(self.opponent),
                "alloc": self.alloc.label, "alloc_prime": self.alloc_prime.label,
                "lhs": self.lhs, "rhs": self.rhs}


def _s_cost(s: SBid, t_bundle: Bundle) -> float:
    """Additive s-player cost of whatever the t-player does not take."""
    held = t_bundle.complement
    return (s[0] if held.has(1) else 0.0) + (s[1] if held.has(2) else 0.0)


def _player_cost(player: int, profile: Profile, t_bundle: Bundle) -> float:
    t, s = profile
    return t.cost(t_bundle) if player == T_PLAYER else _s_cost(s, t_bundle)


def _check_probe(player: int, probe: Probe) -> None:
    (t, s), (t2, s2) = probe
    if player == T_PLAYER and tuple(s) != tuple(s2):
        raise BadProbe(f"t-player probe changes the s-bid: {s} -> {s2}")
    if player == S_PLAYER and t != t2:
        raise BadProbe(f"s-player probe changes the t-bid: {t} -> {t2}")
    if player not in (T_PLAYER, S_PLAYER):
        raise BadProbe(f"unknown player {player}")


def wmon_check(alloc: TwoPlayerOracle, player: int, probes: Iterable[Probe]) -> ViolationWitness | None:
    """First probe that violates weak monotonicity for ``player`` beyond EPS_CMP, or None."""
    eps = config.EPS_CMP
    for probe in probes:
        _check_probe(player, probe)
        before, after = probe
        a, a2 = alloc(*before), alloc(*after)
        lhs = _player_cost(player, before, a) - _player_cost(player, before, a2)
        rhs = _player_cost(player, after, a) - _player_cost(player, after, a2)
        if lhs > rhs + eps:
            own = (lambda p: p[0].as_tuple()) if player == T_PLAYER else (lambda p: tuple(p[1]))
            other = (lambda p: tuple(p[1])) if player == T_PLAYER else (lambda p: p[0].as_tuple())
            return ViolationWitness(player, own(before), own(after), other(before), a, a2, lhs, rhs)
    return None


def t_grid(axis: Sequence[float], domain: DomainSpec = V) -> list[TwoTaskValuation]:
    """All monotone ``(t1, t2, t12)`` on the axis cross product that lie in ``domain``."""
    out = []
    for t1, t2, t12 in itertools.product(axis, repeat=3):
        v = TwoTaskValuation(float(t1), float(t2), float(t12))
        if v.is_monotone(0.0) and domain_check(v, domain):
            out.append(v)
    return out


def s_grid(axis: Sequence[float]) -> list[SBid]:
    return [(float(a), float(b)) for a, b in itertools.product(axis, repeat=2)]


def grid_probes(player: int, t_axis: Sequence[float], s_axis: Sequence[float],
                domain: DomainSpec = V) -> Iterator[Probe]:
    """Exhaustive probe pairs in lexicographic order: opponent bid, then own bid, then deviation."""
    ts, ss = t_grid(t_axis, domain), s_grid(s_axis)
    if player == T_PLAYER:
        for s in ss:
            for a, b in itertools.product(ts, repeat=2):
                yield (a, s), (b, s)
    else:
        for t in ts:
            for a, b in itertools.product(ss, repeat=2):
                yield (t, a), (t, b)


def _random_t(rng: np.random.Generator, scale: float, domain: DomainSpec) -> TwoTaskValuation:
    for _ in range(1000):
        t1, t2 = rng.uniform(0.0, scale, size=2)
        if domain.kind.value in ("VPlus", "VPlusB"):
            t12 = t1 + t2
        elif domain.kind.value in ("VEps", "VSubmodEps"):
            hi = domain.eps if domain.kind.value == "VEps" else 0.0
            t12 = t1 + t2 + rng.uniform(-domain.eps, hi)
        elif domain.kind.value == "VSubmod":
            t12 = rng.uniform(max(t1, t2), t1 + t2)
        else:
            t12 = rng.uniform(max(t1, t2), t1 + t2 + scale)
        v = TwoTaskValuation(float(t1), float(t2), float(t12))
        if v.is_monotone(0.0) and domain_check(v, domain):
            return v
    raise ValueError(f"could not sample a valuation in {domain}")


def random_probes(player: int, count: int, seed: int, scale: float = 3.0,
                  domain: DomainSpec = V) -> list[Probe]:
    """``count`` seeded random probe pairs for ``player`` with bids drawn from ``[0, scale]``."""
    rng = np.random.default_rng(seed)
    probes = []
    for _ in range(count):
        if player == T_PLAYER:
            s = tuple(float(x) for x in rng.uniform(0.0, scale, size=2))
            probes.append(((_random_t(rng, scale, domain), s), (_random_t(rng, scale, domain), s)))
        else:
            t = _random_t(rng, scale, domain)
            a = tuple(float(x) for x in rng.uniform(0.0, scale, size=2))
            b = tuple(float(x) for x in rng.uniform(0.0, scale, size=2))
            probes.append(((t, a), (t, b)))
    return probes


def _first_violation(costs: np.ndarray, codes: np.ndarray) -> tuple[int, tuple[int, int] | None]:
    """Count WMON violations among all (own, deviation) pairs; ``costs[a, k]`` is bid a's cost of bundle k."""
    m = costs[:, codes]                     # m[a, b] = cost under bid a of the bundle bid b receives
    d = np.diag(m)
    lhs = d[:, None] - m
    rhs = m.T - d[None, :]
    bad = lhs > rhs + config.EPS_CMP
    count = int(bad.sum())
    if not count:
        return 0, None
    flat = int(np.argmax(bad.ravel()))
    return count, divmod(flat, bad.shape[1])


def wmon_grid_check(alloc: TwoPlayerOracle, player: int, t_axis: Sequence[float], s_axis: Sequence[float],
                    domain: DomainSpec = V) -> tuple[int, ViolationWitness | None]:
    """Vectorized exhaustive check over the same probes as :func:`grid_probes`.

    Returns the number of violating probes and the lexicographically first one.
    """
    ts, ss = t_grid(t_axis, domain), s_grid(s_axis)
    total, first = 0, None
    if player == T_PLAYER:
        own_costs = np.array([[0.0, t.t1, t.t2, t.t12] for t in ts])
        for s in ss:
            codes = np.array([int(alloc(t, s)) for t in ts])
            count, where = _first_violation(own_costs, codes)
            total += count
            if where is not None and first is None:
                first = wmon_check(alloc, player, [((ts[where[0]], s), (ts[where[1]], s))])
    else:
        # s-player cost of the t-player's bundle k is the cost of its complement
        own_costs = np.array([[a + b, b, a, 0.0] for a, b in ss])
        for t in ts:
            codes = np.array([int(alloc(t, s)) for s in ss])
            count, where = _first_violation(own_costs, codes)
            total += count
            if where is not None and first is None:
                first = wmon_check(alloc, player, [((t, ss[where[0]]), (t, ss[where[1]]))])
    return total, first


# ---------------------------------------------------------------------------
# Virtual payments


def default_probe_ceiling(bids: Iterable[float]) -> float:
    finite = [abs(b) for b in bids if np.isfinite(b)]
    return 10.0 * sum(finite) + 10.0


def _sup_in_region(inside: Callable[[float], bool], hi: float, tol: float) -> float | None:
    """Supremum of ``{x in [0, hi]: inside(x)}`` for a down-closed region; None if 0 is outside."""
    if not inside(0.0):
        return None
    lo = 0.0
    if inside(hi):
        return hi
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if inside(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def virtual_payments(alloc_at_s: AllocAtS, probe_ceiling: float, tol: float | None = None) -> VirtualPayments:
    """Recover the unique normalized monotone payments of the t-player for one fixed s-bid.

    ``P1`` and ``P2`` are the critical values of one task while the other is
    priced out at ``L = 2 * ceiling``; ``P12`` comes from the exit point of
    the diagonal ray ``(x/2, x/2, x)`` out of the region where the t-player
    receives both tasks.
    """
    tol = config.BISECT_TOL if tol is None else tol
    c = float(probe_ceiling)
    if alloc_at_s(TwoTaskValuation(c, c, 2 * c)) is not Bundle.EMPTY:
        raise AssumptionViolated(f"the t-player still receives tasks at bid ({c}, {c}, {2 * c})")
    far = 2.0 * c

    p1 = _sup_in_region(lambda x: alloc_at_s(TwoTaskValuation(x, far, x + far)).has(1), c, tol) or 0.0
    p2 = _sup_in_region(lambda x: alloc_at_s(TwoTaskValuation(far, x, x + far)).has(2), c, tol) or 0.0

    def diag(x: float) -> Bundle:
        return alloc_at_s(TwoTaskValuation(x / 2, x / 2, x))

    x_star = _sup_in_region(lambda x: diag(x) is Bundle.BOTH, 2 * c, tol)
    if x_star is None:
        p12 = max(p1, p2)
    else:
        exit_bundle = diag(x_star + tol)
        if exit_bundle is Bundle.ONE:
            p12 = p1 + x_star / 2
        elif exit_bundle is Bundle.TWO:
            p12 = p2 + x_star / 2
        else:
            p12 = x_star
    return VirtualPayments(p1, p2, max(p12, p1, p2))


@dataclass(frozen=True)
class TruthfulnessReport:
    max_gain: float
    witness: dict | None

    @property
    def truthful(self) -> bool:
        return self.max_gain <= config.EPS_CMP

    def to_dict(self) -> dict:
        return {"max_gain": self.max_gain, "truthful": self.truthful, "witness": self.witness}


def verify_payment_truthfulness(oracle: TwoPlayerOracle, payment_rule: Callable[[SBid], VirtualPayments],
                                t_axis: Sequence[float], s_axis: Sequence[float],
                                domain: DomainSpec = V) -> TruthfulnessReport:
    """Largest utility gain any t-player type on the grid gets by misreporting another grid type."""
    ts = t_grid(t_axis, domain)
    costs = np.array([[0.0, t.t1, t.t2, t.t12] for t in ts])
    best, witness = -np.inf, None
    for s in s_grid(s_axis):
        pay = np.array(payment_rule(s).as_tuple())
        codes = np.array([int(oracle(t, s)) for t in ts])
        utility = pay[codes][None, :] - costs[:, codes]     # utility[true, reported]
        gain = utility - np.diag(utility)[:, None]
        k = int(np.argmax(gain))
        a, b = divmod(k, gain.shape[1])
        if gain[a, b] > best:
            best = float(gain[a, b])
            witness = {"s": list(s), "true": list(ts[a].as_tuple()), "reported": list(ts[b].as_tuple()),
                       "gain": best}
    return TruthfulnessReport(float(best), witness if best > config.EPS_CMP else None)


# ---------------------------------------------------------------------------
# Lemmas about n-machine mechanisms


def cut_restriction(mech: NMechanism, pair: int, fixed: Instance | RestrictedInstance) -> TwoPlayerOracle:
    """Two-player oracle on pair ``pair`` with every other bid taken from ``fixed``."""
    base = as_instance(fixed)

    def oracle(t: TwoTaskValuation, s: SBid) -> Bundle:
        return mech(base.replace_pair(pair, t=t, s=tuple(s))).pair_bundle(pair)

    return oracle


def _own_tasks(inst: Instance, machine: int) -> list:
    """Tasks whose bid the machine controls: all of them for the t-player, its own pair for an s-player."""
    return inst.tasks() if machine == 0 else [t for t in inst.tasks() if t.pair == machine]


def lemma_tool_check(mech: NMechanism, inst: Instance | RestrictedInstance,
                     perturbed: Instance | RestrictedInstance) -> bool:
    """Does ``mech`` keep machine i's task set after i lowers won-task bids and raises the rest?"""
    before, after = as_instance(inst), as_instance(perturbed)
    if before.n != after.n or before.n_pairs != after.n_pairs:
        raise BadPerturbation("instances have different shapes")
    changed = [m for m in range(before.n) if _machine_profile(before, m) != _machine_profile(after, m)]
    if len(changed) != 1:
        raise BadPerturbation(f"exactly one machine must change its bid, got {changed}")
    machine = changed[0]
    if machine == 0:
        for pair in list(before.t.pairs) + list(after.t.pairs):
            if abs(pair.t12 - pair.t1 - pair.t2) > config.EPS_CMP:
                raise BadPerturbation("the t-player's bids must be additive")
    won = set(mech(before).tasks_of(machine))
    for task in _own_tasks(before, machine):
        a, b = before.task_cost(machine, task), after.task_cost(machine, task)
        if task in won and not b < a:
            raise BadPerturbation(f"bid on won task {task} must strictly decrease ({a} -> {b})")
        if task not in won and not b > a:
            raise BadPerturbation(f"bid on lost task {task} must strictly increase ({a} -> {b})")
    return set(mech(after).tasks_of(machine)) == won


def _machine_profile(inst: Instance, machine: int) -> tuple:
    if machine == 0:
        return tuple(p.as_tuple() for p in inst.t.pairs)
    return tuple(inst.s_bids[machine - 1])
