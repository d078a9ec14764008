"""Allocation oracles for every two-task mechanism family, plus n-machine lifts.

A two-player oracle is any callable ``(t, s) -> Bundle`` where ``t`` is the
t-player's :class:`TwoTaskValuation` and ``s = (s1, s2)`` the additive
s-player bid; it returns the t-player's bundle.  An n-machine mechanism is a
callable ``Instance -> Allocation``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, Union

from . import config
from .curves import MonotoneCurve
from .errors import GluingViolation, UnboundedPayment
from .valuations import Bundle, Instance, RestrictedInstance, Task, TwoTaskValuation

SBid = tuple[float, float]
TwoPlayerOracle = Callable[[TwoTaskValuation, SBid], Bundle]

INF = math.inf


@dataclass(frozen=True)
class AffineParams:
    mu_t: float = 1.0
    mu_s: float = 1.0
    gamma12: float = 0.0
    gamma1: float = 0.0
    gamma2: float = 0.0
    gamma_empty: float = 0.0

    def __post_init__(self):
        if not (self.mu_t > 0 and self.mu_s > 0):
            raise ValueError("mu_t and mu_s must be positive")

    def gamma(self, bundle: Bundle) -> float:
        return (self.gamma_empty, self.gamma1, self.gamma2, self.gamma12)[bundle]

    def scaled(self, c: float) -> AffineParams:
        return AffineParams(c * self.mu_t, c * self.mu_s, c * self.gamma12, c * self.gamma1,
                            c * self.gamma2, c * self.gamma_empty)

    @property
    def bundling_threshold(self) -> float:
        """``min(gamma1, gamma2) - gamma_empty``: below it (in weighted s-sum) the bundling tail applies."""
        return min(self.gamma1, self.gamma2) - self.gamma_empty


VCG = AffineParams()


@dataclass(frozen=True)
class VirtualPayments:
    """Normalized, monotone payments to the t-player for one fixed s."""

    p1: float
    p2: float
    p12: float

    p_empty = 0.0

    def for_bundle(self, bundle: Bundle) -> float:
        return (0.0, self.p1, self.p2, self.p12)[bundle]

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (0.0, self.p1, self.p2, self.p12)


def affine_objectives(p: AffineParams, t: TwoTaskValuation, s: SBid) -> tuple[float, float, float, float]:
    """Weighted cost of the four allocations, indexed by the t-player's bundle."""
    s1, s2 = s
    return (
        p.mu_s * (s1 + s2) + p.gamma_empty,
        p.mu_t * t.t1 + p.mu_s * s2 + p.gamma1,
        p.mu_s * s1 + p.mu_t * t.t2 + p.gamma2,
        p.mu_t * t.t12 + p.gamma12,
    )


def _argmin_bundle(values: Sequence[float]) -> Bundle:
    best = Bundle.EMPTY
    for bundle in Bundle:
        if values[bundle] < values[best]:
            best = bundle
    return best


def allocate_affine(p: AffineParams, t: TwoTaskValuation, s: SBid) -> Bundle:
    return _argmin_bundle(affine_objectives(p, t, s))


def check_gluing(p: AffineParams, xi: MonotoneCurve) -> None:
    threshold = p.bundling_threshold
    if not (0 < threshold < INF):
        return
    lhs = min(p.gamma1, p.gamma2) - p.gamma12
    if abs(lhs - xi(threshold)) > config.EPS_CMP:
        raise GluingViolation(f"min(gamma1, gamma2) - gamma12 = {lhs} but xi({threshold}) = {xi(threshold)}")


def allocate_relaxed(p: AffineParams, xi: MonotoneCurve, t: TwoTaskValuation, s: SBid) -> Bundle:
    check_gluing(p, xi)
    return _relaxed(p, xi, t, s)


def _relaxed(p: AffineParams, xi: MonotoneCurve, t: TwoTaskValuation, s: SBid) -> Bundle:
    weighted = p.mu_s * (s[0] + s[1])
    if weighted >= p.bundling_threshold:
        return allocate_affine(p, t, s)
    return Bundle.BOTH if p.mu_t * t.t12 < xi(weighted) else Bundle.EMPTY


def allocate_one_dimensional(xi: MonotoneCurve, t: TwoTaskValuation, s: SBid) -> Bundle:
    return Bundle.BOTH if t.t12 < xi(s[0] + s[1]) else Bundle.EMPTY


def allocate_task_independent(phi: MonotoneCurve, eta: MonotoneCurve, t: TwoTaskValuation, s: SBid) -> Bundle:
    mask = (1 if t.t1 < phi(s[0]) else 0) | (2 if t.t2 < eta(s[1]) else 0)
    return Bundle(mask)


def allocate_constant(fixed: Bundle, t: TwoTaskValuation | None = None, s: SBid | None = None) -> Bundle:
    return fixed


def payments_affine(p: AffineParams, s: SBid, t: TwoTaskValuation | None = None) -> VirtualPayments:
    """Threshold payments that make the affine minimizer truthful for the t-player.

    ``t`` is accepted for symmetry with the allocation functions; the payments
    do not depend on the t-player's own bid.
    """
    s1, s2 = s
    if p.gamma_empty == INF or -INF in (p.gamma1, p.gamma2, p.gamma12):
        raise UnboundedPayment("a -inf gamma (or +inf gamma_empty) makes the threshold payment infinite")

    def raw(extra_s: float, gamma: float) -> float:
        if gamma == INF or p.gamma_empty == -INF:
            return -INF
        return (p.mu_s * extra_s + p.gamma_empty - gamma) / p.mu_t

    p1 = max(0.0, raw(s1, p.gamma1))
    p2 = max(0.0, raw(s2, p.gamma2))
    p12 = max(p1, p2, raw(s1 + s2, p.gamma12))
    return VirtualPayments(p1, p2, p12)


# ---------------------------------------------------------------------------
# Two-player families as callable values


@dataclass(frozen=True)
class AffineMin:
    params: AffineParams = VCG
    family = "affine_min"

    def __call__(self, t: TwoTaskValuation, s: SBid) -> Bundle:
        return allocate_affine(self.params, t, s)

    def payments(self, s: SBid) -> VirtualPayments:
        return payments_affine(self.params, s)


@dataclass(frozen=True)
class RelaxedAffineMin:
    params: AffineParams
    xi: MonotoneCurve
    family = "relaxed_affine_min"

    def __post_init__(self):
        check_gluing(self.params, self.xi)

    def __call__(self, t: TwoTaskValuation, s: SBid) -> Bundle:
        return _relaxed(self.params, self.xi, t, s)


@dataclass(frozen=True)
class Bundling:
    xi: MonotoneCurve
    family = "bundling"

    def __call__(self, t: TwoTaskValuation, s: SBid) -> Bundle:
        return allocate_one_dimensional(self.xi, t, s)


@dataclass(frozen=True)
class TaskIndependent:
    phi: MonotoneCurve
    eta: MonotoneCurve
    family = "task_independent"

    def __call__(self, t: TwoTaskValuation, s: SBid) -> Bundle:
        return allocate_task_independent(self.phi, self.eta, t, s)


@dataclass(frozen=True)
class Constant:
    allocation: Bundle = Bundle.EMPTY
    family = "constant"

    def __call__(self, t: TwoTaskValuation, s: SBid) -> Bundle:
        return self.allocation


@dataclass(frozen=True)
class AntiMonotone:
    """Control oracle that breaks WMON: task 1 goes to the t-player iff ``t1 > kappa * s1``.

    Task 2 always goes to the t-player.
    """

    kappa: float = 1.0
    family = "anti_monotone"

    def __call__(self, t: TwoTaskValuation, s: SBid) -> Bundle:
        return Bundle.BOTH if t.t1 > self.kappa * s[0] else Bundle.TWO


# ---------------------------------------------------------------------------
# n-machine allocations


@dataclass(frozen=True)
class Allocation:
    """Machine index per task, in the canonical order 1, 1', 2, 2', ..."""

    machines: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "machines", tuple(int(m) for m in self.machines))

    @classmethod
    def from_pair_bundles(cls, bundles: Iterable[Bundle]) -> Allocation:
        machines: list[int] = []
        for i, bundle in enumerate(bundles, start=1):
            machines.append(0 if bundle.has(1) else i)
            machines.append(0 if bundle.has(2) else i)
        return cls(tuple(machines))

    @property
    def n_pairs(self) -> int:
        return len(self.machines) // 2

    def machine_of(self, task: Task) -> int:
        return self.machines[task.index]

    def tasks_of(self, machine: int) -> list[Task]:
        return [Task(k // 2 + 1, bool(k % 2)) for k, m in enumerate(self.machines) if m == machine]

    def pair_bundle(self, pair: int) -> Bundle:
        """The t-player's share of twin pair ``pair`` (task i -> ONE, task i' -> TWO)."""
        a, b = self.machines[2 * (pair - 1)], self.machines[2 * (pair - 1) + 1]
        return Bundle((1 if a == 0 else 0) | (2 if b == 0 else 0))

    def t_player_pairs(self) -> frozenset[int]:
        """Pairs whose unprimed task the t-player receives."""
        return frozenset(k // 2 + 1 for k, m in enumerate(self.machines) if m == 0 and k % 2 == 0)

    def t_player_tasks(self) -> frozenset[Task]:
        return frozenset(self.tasks_of(0))


NMechanism = Callable[[Instance], Allocation]


def as_instance(inst: Instance | RestrictedInstance) -> Instance:
    return inst.to_instance() if isinstance(inst, RestrictedInstance) else inst


def run(mech: NMechanism, inst: Instance | RestrictedInstance) -> Allocation:
    return mech(as_instance(inst))


@dataclass(frozen=True)
class PerPair:
    """Apply a two-player oracle independently on every twin pair.

    Each pair is split between the t-player and its own s-player; the other
    s-players (fixed cost theta) never receive anything.
    """

    oracle: TwoPlayerOracle

    @property
    def family(self) -> str:
        return getattr(self.oracle, "family", "per_pair")

    def __call__(self, inst: Instance) -> Allocation:
        return Allocation.from_pair_bundles(self.oracle(*inst.pair_view(i)) for i in range(1, inst.n_pairs + 1))


@dataclass(frozen=True)
class PerTaskLinear:
    """Per-task truncated affine thresholds: the canonical linear test subject.

    Twin tasks ``i'`` always go to the t-player; task ``i`` goes to the
    t-player iff its marginal cost ``t_ii' - t_i'`` (which is ``t_i`` on
    restricted instances) is below ``max(0, lambda_i * s_i + gamma_i)``.
    A single lambda/gamma is broadcast to every pair.
    """

    lambdas: tuple[float, ...] = (1.0,)
    gammas: tuple[float, ...] = (0.0,)
    family = "per_task_linear"

    def __post_init__(self):
        lambdas = tuple(float(x) for x in _as_seq(self.lambdas))
        gammas = tuple(float(x) for x in _as_seq(self.gammas))
        if any(x < 0 for x in lambdas):
            raise ValueError("lambda_i must be non-negative")
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "gammas", gammas)

    def params(self, pair: int) -> tuple[float, float]:
        lam = self.lambdas[0] if len(self.lambdas) == 1 else self.lambdas[pair - 1]
        gam = self.gammas[0] if len(self.gammas) == 1 else self.gammas[pair - 1]
        return lam, gam

    def threshold(self, pair: int, s_i: float) -> float:
        lam, gam = self.params(pair)
        return max(0.0, lam * s_i + gam)

    def pair_oracle(self, pair: int) -> TwoPlayerOracle:
        def oracle(t: TwoTaskValuation, s: SBid) -> Bundle:
            takes_i = t.t12 - t.t2 < self.threshold(pair, s[0])
            return Bundle.BOTH if takes_i else Bundle.TWO
        return oracle

    def __call__(self, inst: Instance) -> Allocation:
        return Allocation.from_pair_bundles(
            self.pair_oracle(i)(*inst.pair_view(i)) for i in range(1, inst.n_pairs + 1))


def _as_seq(x) -> Sequence[float]:
    if isinstance(x, (int, float)):
        return (x,)
    return tuple(x)


def allocate_per_task_linear(params: PerTaskLinear, inst: Instance | RestrictedInstance) -> Allocation:
    return run(params, inst)


@dataclass(frozen=True)
class CoupledAffine:
    """An n-machine affine minimizer whose constants couple two unprimed tasks.

    Minimizes ``mu_t * v_0(A_0) + mu_s * sum_k v_k(A_k) + sum_pairs gamma_pair
    + coupling(A_0)`` where ``coupling`` depends on which of the unprimed
    tasks ``pair_a`` and ``pair_b`` the t-player holds, in the order
    (neither, only a, only b, both).  Bonus < 0 for "both" gives quasi-bundling
    cuts, a penalty gives quasi-flipping cuts.  Affine minimizers over a fixed
    range are truthful, so this is a linear truthful mechanism with cross-pair
    interaction.
    """

    base: AffineParams = VCG
    pair_a: int = 1
    pair_b: int = 2
    coupling: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    family = "coupled_affine"

    def __post_init__(self):
        if self.pair_a == self.pair_b:
            raise ValueError("coupled pairs must differ")
        object.__setattr__(self, "coupling", tuple(float(c) for c in self.coupling))

    def __call__(self, inst: Instance) -> Allocation:
        bundles = [allocate_affine(self.base, *inst.pair_view(i)) for i in range(1, inst.n_pairs + 1)]
        a, b = self.pair_a, self.pair_b
        obj_a = affine_objectives(self.base, *inst.pair_view(a))
        obj_b = affine_objectives(self.base, *inst.pair_view(b))
        best, best_val = None, INF
        for ba, bb in itertools.product(Bundle, Bundle):
            val = obj_a[ba] + obj_b[bb] + self.coupling[int(ba.has(1)) | (int(bb.has(1)) << 1)]
            if best is None or val < best_val:
                best, best_val = (ba, bb), val
        bundles[a - 1], bundles[b - 1] = best
        return Allocation.from_pair_bundles(bundles)


AnyMechanism = Union[AffineMin, RelaxedAffineMin, Bundling, TaskIndependent, Constant, AntiMonotone,
                     PerTaskLinear, CoupledAffine, PerPair]


def lift(mech) -> NMechanism:
    """Turn a two-player family into an n-machine mechanism; n-machine ones pass through."""
    if isinstance(mech, (PerTaskLinear, CoupledAffine, PerPair)):
        return mech
    return PerPair(mech)
