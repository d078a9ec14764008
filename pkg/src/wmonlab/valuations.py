"""Cost functions, valuation domains and the pair-structured instances.

Tasks come in twin pairs ``(i, i')`` indexed from 1.  The t-player (machine 0)
has a submodular cost on each pair and is additive across pairs; s-player ``i``
(machine ``i``) is additive, bids ``(s_i, s_i')`` on its own pair and costs a
fixed ``theta`` on every other task.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from . import config
from .errors import NonMonotone, UnknownTask


class Bundle(enum.IntEnum):
    """The t-player's share of a two-task problem.

    The integer value is a bit mask (task 1 -> 1, task 2 -> 2) and doubles as
    the fixed tie-breaking order EMPTY < ONE < TWO < BOTH.
    """

    EMPTY = 0
    ONE = 1
    TWO = 2
    BOTH = 3

    def has(self, task: int) -> bool:
        return bool(self.value & (1 << (task - 1)))

    @property
    def complement(self) -> Bundle:
        return Bundle(3 - self.value)

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def parse(cls, text: str | int) -> Bundle:
        key = str(text).strip().lower()
        if key not in _ALIASES:
            raise ValueError(f"unknown bundle {text!r}")
        return _ALIASES[key]


_LABELS = {Bundle.EMPTY: "empty", Bundle.ONE: "1", Bundle.TWO: "2", Bundle.BOTH: "12"}
_ALIASES = {"": Bundle.EMPTY, "empty": Bundle.EMPTY, "none": Bundle.EMPTY, "∅": Bundle.EMPTY,
            "1": Bundle.ONE, "2": Bundle.TWO, "12": Bundle.BOTH}


class Task(NamedTuple):
    pair: int
    primed: bool = False

    @property
    def index(self) -> int:
        """Position in the canonical task order 1, 1', 2, 2', ..."""
        return 2 * (self.pair - 1) + int(self.primed)

    def __str__(self) -> str:
        return f"{self.pair}'" if self.primed else str(self.pair)

    @classmethod
    def parse(cls, text: str | int | Task) -> Task:
        if isinstance(text, Task):
            return text
        s = str(text).strip()
        primed = s.endswith("'") or s.endswith("p")
        return cls(int(s.rstrip("'p")), primed)


@dataclass(frozen=True)
class TwoTaskValuation:
    """Costs ``(t1, t2, t12)`` of one machine for the subsets of two tasks."""

    t1: float
    t2: float
    t12: float

    @classmethod
    def additive(cls, t1: float, t2: float) -> TwoTaskValuation:
        return cls(t1, t2, t1 + t2)

    def cost(self, bundle: Bundle) -> float:
        return (0.0, self.t1, self.t2, self.t12)[bundle]

    def is_monotone(self, eps: float | None = None) -> bool:
        eps = config.EPS_CMP if eps is None else eps
        return min(self.t1, self.t2) >= -eps and self.t12 >= max(self.t1, self.t2) - eps

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.t1, self.t2, self.t12)


class DomainKind(enum.Enum):
    V = "V"
    VPLUS = "VPlus"
    VPLUS_B = "VPlusB"
    VEPS = "VEps"
    VSUBMOD = "VSubmod"
    VSUBMOD_EPS = "VSubmodEps"


@dataclass(frozen=True)
class DomainSpec:
    kind: DomainKind
    bound: float | None = None
    eps: float | None = None

    def __post_init__(self):
        if self.kind is DomainKind.VPLUS_B and not (self.bound is not None and self.bound > 0):
            raise ValueError("VPlusB needs a positive bound B")
        if self.kind in (DomainKind.VEPS, DomainKind.VSUBMOD_EPS) and not (self.eps is not None and self.eps > 0):
            raise ValueError(f"{self.kind.value} needs a positive eps")

    @classmethod
    def parse(cls, text: str) -> DomainSpec:
        """Parse ``V``, ``VPlus``, ``VPlusB:400``, ``VEps:0.1``, ``VSubmod``, ``VSubmodEps:0.1``."""
        name, _, arg = text.partition(":")
        kind = DomainKind(name)
        if kind is DomainKind.VPLUS_B:
            return cls(kind, bound=float(arg))
        if kind in (DomainKind.VEPS, DomainKind.VSUBMOD_EPS):
            return cls(kind, eps=float(arg))
        return cls(kind)


V = DomainSpec(DomainKind.V)
VPLUS = DomainSpec(DomainKind.VPLUS)
VSUBMOD = DomainSpec(DomainKind.VSUBMOD)


def domain_check(v: TwoTaskValuation, d: DomainSpec) -> bool:
    if not v.is_monotone():
        raise NonMonotone(f"{v} is not a monotone valuation")
    eps = config.EPS_CMP
    gap = v.t12 - (v.t1 + v.t2)
    kind = d.kind
    if kind is DomainKind.V:
        return True
    if kind is DomainKind.VPLUS:
        return abs(gap) <= eps
    if kind is DomainKind.VPLUS_B:
        return abs(gap) <= eps and v.t1 < d.bound and v.t2 < d.bound
    if kind is DomainKind.VSUBMOD:
        return gap <= eps
    # open interval, no tolerance: boundary points are rejected
    in_band = -d.eps < gap < d.eps
    if kind is DomainKind.VEPS:
        return in_band
    return in_band and gap <= eps


@dataclass(frozen=True)
class PairwiseValuation:
    """The t-player's cost: one two-task valuation per twin pair, summed across pairs."""

    pairs: tuple[TwoTaskValuation, ...]

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))

    def __len__(self) -> int:
        return len(self.pairs)

    def pair_cost(self, pair: int, bundle: Bundle) -> float:
        return self.pairs[pair - 1].cost(bundle)


def _split_by_pair(tasks: Iterable[Task | str | int], n_pairs: int) -> dict[int, Bundle]:
    held: dict[int, int] = {}
    for raw in tasks:
        task = Task.parse(raw)
        if not 1 <= task.pair <= n_pairs:
            raise UnknownTask(f"task {task} is outside pairs 1..{n_pairs}")
        held[task.pair] = held.get(task.pair, 0) | (2 if task.primed else 1)
    return {pair: Bundle(mask) for pair, mask in held.items()}


def eval_cost(v: PairwiseValuation, tasks: Iterable[Task | str | int]) -> float:
    by_pair = _split_by_pair(tasks, len(v))
    return sum(v.pair_cost(pair, bundle) for pair, bundle in by_pair.items())


@dataclass(frozen=True)
class Instance:
    """A full n-machine instance on the 2(n-1) twin tasks."""

    n: int
    theta: float
    t: PairwiseValuation
    s_bids: tuple[tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "s_bids", tuple((float(a), float(b)) for a, b in self.s_bids))

    @classmethod
    def build(cls, n: int, pairs: Sequence[tuple[float, float, float]], s_bids: Sequence[tuple[float, float]],
              theta: float | None = None) -> Instance:
        return cls(n, config.default_theta(n) if theta is None else theta,
                   PairwiseValuation(tuple(TwoTaskValuation(*p) for p in pairs)), tuple(s_bids))

    @property
    def n_pairs(self) -> int:
        return len(self.s_bids)

    @property
    def n_tasks(self) -> int:
        return 2 * self.n_pairs

    def tasks(self) -> list[Task]:
        return [Task(i, primed) for i in range(1, self.n_pairs + 1) for primed in (False, True)]

    def task_cost(self, machine: int, task: Task) -> float:
        """Stand-alone cost of one task on one machine (the t-player's singleton cost for machine 0)."""
        if machine == 0:
            pair = self.t.pairs[task.pair - 1]
            return pair.t2 if task.primed else pair.t1
        if machine == task.pair:
            return self.s_bids[task.pair - 1][int(task.primed)]
        return self.theta

    def machine_cost(self, machine: int, tasks: Iterable[Task]) -> float:
        tasks = list(tasks)
        if machine == 0:
            return eval_cost(self.t, tasks)
        return sum(self.task_cost(machine, task) for task in tasks)

    def pair_view(self, pair: int) -> tuple[TwoTaskValuation, tuple[float, float]]:
        """The two-player sub-problem on one twin pair."""
        return self.t.pairs[pair - 1], self.s_bids[pair - 1]

    def replace_pair(self, pair: int, t: TwoTaskValuation | None = None,
                     s: tuple[float, float] | None = None) -> Instance:
        pairs = list(self.t.pairs)
        bids = list(self.s_bids)
        if t is not None:
            pairs[pair - 1] = t
        if s is not None:
            bids[pair - 1] = s
        return Instance(self.n, self.theta, PairwiseValuation(tuple(pairs)), tuple(bids))


class Issue(NamedTuple):
    code: str
    detail: str


def validate_instance(inst: Instance) -> list[Issue]:
    """List every violated instance invariant; an empty list means the instance is valid."""
    eps = config.EPS_CMP
    issues: list[Issue] = []
    if inst.n < 2:
        issues.append(Issue("TooFewMachines", f"n={inst.n} < 2"))
    if inst.n_pairs != inst.n - 1 or len(inst.t) != inst.n - 1:
        issues.append(Issue("WrongPairCount", f"expected {inst.n - 1} pairs, got {inst.n_pairs} bids "
                                              f"and {len(inst.t)} t-valuations"))
    if not inst.theta >= 4 * inst.n ** 2:
        issues.append(Issue("ThetaTooSmall", f"theta={inst.theta} < 4*n^2={4 * inst.n ** 2}"))
    for i, pair in enumerate(inst.t.pairs, start=1):
        if min(pair.as_tuple()) < 0:
            issues.append(Issue("NegativeBid", f"t-player pair {i}: {pair.as_tuple()}"))
        if not pair.is_monotone():
            issues.append(Issue("PairNotMonotone", f"pair {i}: {pair.as_tuple()}"))
        if pair.t12 > pair.t1 + pair.t2 + eps:
            issues.append(Issue("PairNotSubmodular", f"pair {i}: t12={pair.t12} > t1+t2={pair.t1 + pair.t2}"))
    for i, (a, b) in enumerate(inst.s_bids, start=1):
        if a < 0 or b < 0:
            issues.append(Issue("NegativeBid", f"s-player {i}: {(a, b)}"))
    return issues


@dataclass(frozen=True)
class RestrictedInstance:
    """Lower-bound instance: ``s_i in [0, 1]``, ``s_i' = n``, ``t_i' = 0`` and ``t_ii' = t_i``."""

    n: int
    t: tuple[float, ...]
    s: tuple[float, ...]
    theta: float | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "t", tuple(float(x) for x in self.t))
        object.__setattr__(self, "s", tuple(float(x) for x in self.s))
        if self.theta is None:
            object.__setattr__(self, "theta", config.default_theta(self.n))
        if len(self.t) != self.n - 1 or len(self.s) != self.n - 1:
            raise ValueError(f"restricted instance with n={self.n} needs {self.n - 1} t and s values")
        eps = config.EPS_CMP
        for x in self.s:
            if not -eps <= x <= 1 + eps:
                raise ValueError(f"s value {x} outside [0, 1]")
        for x in self.t:
            if x < 0 or math.isnan(x):
                raise ValueError(f"t value {x} is negative")

    @property
    def n_pairs(self) -> int:
        return self.n - 1

    def to_instance(self) -> Instance:
        pairs = tuple(TwoTaskValuation(ti, 0.0, ti) for ti in self.t)
        return Instance(self.n, self.theta, PairwiseValuation(pairs), tuple((si, float(self.n)) for si in self.s))

    def with_task(self, i: int, t: float | None = None, s: float | None = None) -> RestrictedInstance:
        ts, ss = list(self.t), list(self.s)
        if t is not None:
            ts[i - 1] = t
        if s is not None:
            ss[i - 1] = s
        return RestrictedInstance(self.n, tuple(ts), tuple(ss), self.theta)

    @classmethod
    def from_instance(cls, inst: Instance) -> RestrictedInstance | None:
        """Recognise an instance that already has the restricted shape, else None."""
        eps = config.EPS_CMP
        for pair, (si, sip) in zip(inst.t.pairs, inst.s_bids):
            if not (abs(pair.t2) <= eps and abs(pair.t12 - pair.t1) <= eps
                    and abs(sip - inst.n) <= eps and -eps <= si <= 1 + eps and pair.t1 >= 0):
                return None
        if inst.n_pairs != inst.n - 1:
            return None
        return cls(inst.n, tuple(p.t1 for p in inst.t.pairs),
                   tuple(min(max(si, 0.0), 1.0) for si, _ in inst.s_bids), inst.theta)
