"""Region figures for a fixed opponent bid, boundary curves and their linearity tests."""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from . import config
from .curves import MonotoneCurve
from .errors import (AssumptionViolated, InsufficientSamples, NonLinearBoundary, NonMonotoneInOwnBid,
                     OutOfRange, Undetermined)
from .mechanisms import NMechanism, SBid, TwoPlayerOracle, VirtualPayments
from .truthfulness import AllocAtS, default_probe_ceiling, virtual_payments
from .valuations import Bundle, RestrictedInstance, TwoTaskValuation


class FigureClass(enum.Enum):
    CROSSING = "crossing"
    QUASI_FLIPPING = "quasi-flipping"
    QUASI_BUNDLING = "quasi-bundling"


@dataclass(frozen=True)
class CriticalProfile:
    """Critical values of the t-player for one s-bid.

    ``f_prime``/``g_prime`` are the stand-alone thresholds of task 1/2; ``f``
    and ``g`` are the thresholds of one task while holding the other, or None
    where they are undefined.  ``beyond_notation`` marks the fully bundled case
    in which both are reported anyway from the payments.
    """

    f_prime: float
    g_prime: float
    f: float | None
    g: float | None
    payments: VirtualPayments | None = None
    beyond_notation: bool = False
    resolution: float = 0.0

    @classmethod
    def from_payments(cls, p: VirtualPayments, f_defined: bool = True, g_defined: bool = True,
                      beyond_notation: bool = False, resolution: float = 0.0) -> CriticalProfile:
        return cls(p.p1, p.p2, p.p12 - p.p2 if f_defined else None, p.p12 - p.p1 if g_defined else None,
                   p, beyond_notation, resolution)

    def to_dict(self) -> dict:
        out = {"f_prime": self.f_prime, "g_prime": self.g_prime, "f": self.f, "g": self.g,
               "beyond_notation": self.beyond_notation}
        if self.payments is not None:
            out["payments"] = {"p1": self.payments.p1, "p2": self.payments.p2, "p12": self.payments.p12}
        return out


def _borders(alloc_at_s: AllocAtS, p: VirtualPayments, task: int, tol: float) -> bool:
    """Does the region of both tasks touch the region of the other task alone?

    Probes across the candidate boundary halfway up the other task's stand-alone strip.
    """
    other_p = p.p2 if task == 1 else p.p1
    if other_p <= 10 * tol:
        return False
    edge = p.p12 - other_p
    h = max(100 * tol, 1e-6)
    if edge - h < 0:
        return False

    def at(x: float) -> Bundle:
        y = other_p / 2
        return alloc_at_s(TwoTaskValuation(x, y, x + y) if task == 1 else TwoTaskValuation(y, x, x + y))

    single = Bundle.TWO if task == 1 else Bundle.ONE
    return at(edge - h) is Bundle.BOTH and at(edge + h) is single


def critical_profile(alloc_at_s: AllocAtS, probe_ceiling: float, tol: float | None = None) -> CriticalProfile:
    tol = config.BISECT_TOL if tol is None else tol
    p = virtual_payments(alloc_at_s, probe_ceiling, tol)
    eps = config.EPS_CMP + 10 * tol
    f_def = _borders(alloc_at_s, p, 1, tol) or abs(p.p12 - p.p2) <= eps
    g_def = _borders(alloc_at_s, p, 2, tol) or abs(p.p12 - p.p1) <= eps
    # probed thresholds carry bisection error, so differences below a few tol are ties
    if not f_def and not g_def and p.p1 <= eps and p.p2 <= eps:
        return CriticalProfile.from_payments(p, beyond_notation=True, resolution=10 * tol)
    return CriticalProfile.from_payments(p, f_def, g_def, resolution=10 * tol)


def classify_figure(cp: CriticalProfile) -> FigureClass:
    eps = config.EPS_CMP + cp.resolution
    if cp.f is not None:
        diff = cp.f_prime - cp.f
    elif cp.g is not None:
        diff = cp.g_prime - cp.g
    elif cp.payments is not None:
        diff = cp.payments.p1 - (cp.payments.p12 - cp.payments.p2)
    elif cp.f_prime <= eps and cp.g_prime <= eps:
        raise Undetermined("f and g are undefined and f' = g' = 0")
    else:
        raise Undetermined("f and g are undefined and no payments are attached")
    if diff < -eps:
        return FigureClass.QUASI_BUNDLING
    if diff > eps:
        return FigureClass.QUASI_FLIPPING
    return FigureClass.CROSSING


# ---------------------------------------------------------------------------
# Boundaries of n-machine mechanisms on restricted instances


def task_pair_cut(mech: NMechanism, base: RestrictedInstance, i: int, j: int) -> AllocAtS:
    """The t-player's share of tasks ``(i, j)`` as a function of ``(t_i, t_j)``, all else fixed.

    Bids on the cut are additive, so the third coordinate of the argument is ignored.
    """
    def oracle(t: TwoTaskValuation) -> Bundle:
        inst = base.with_task(i, t=t.t1).with_task(j, t=t.t2)
        won = mech(inst.to_instance()).t_player_pairs()
        return Bundle((1 if i in won else 0) | (2 if j in won else 0))
    return oracle


def _restricted_ceiling(base: RestrictedInstance) -> float:
    return default_probe_ceiling(list(base.t) + list(base.s)) + base.n


def boundary_at(mech: NMechanism, inst: RestrictedInstance, i: int, tol: float | None = None,
                ceiling: float | None = None) -> float:
    """psi_i: the supremum of t_i for which the t-player still receives task i."""
    tol = config.BISECT_TOL if tol is None else tol
    hi = _restricted_ceiling(inst) if ceiling is None else ceiling

    def wins(x: float) -> bool:
        return i in mech(inst.with_task(i, t=x).to_instance()).t_player_pairs()

    grid = np.linspace(0.0, hi, 9)
    pattern = [wins(float(x)) for x in grid]
    for a, b in zip(range(len(grid)), range(1, len(grid))):
        if not pattern[a] and pattern[b]:
            raise NonMonotoneInOwnBid(f"task {i} is lost at t_{i} = {grid[a]} but won at {grid[b]}",
                                      task=i, t_lost=float(grid[a]), t_won=float(grid[b]),
                                      s=list(inst.s), t=list(inst.t))
    if pattern[-1]:
        raise AssumptionViolated(f"task {i} still goes to the t-player at t_{i} = {hi}")
    if not pattern[0]:
        return 0.0
    k = pattern.index(False)
    lo, hi = float(grid[k - 1]), float(grid[k])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if wins(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def boundary_scan(mech: NMechanism, i: int, sweep: Sequence[float], base: RestrictedInstance,
                  tol: float | None = None) -> list[tuple[float, float]]:
    """Sample psi_i(s_i) at each swept s_i with every other bid taken from ``base``.

    Sweep points are independent; up to ``config.worker_count()`` of them run concurrently.
    """
    def one(s: float) -> tuple[float, float]:
        return float(s), boundary_at(mech, base.with_task(i, s=float(s)), i, tol)

    workers = config.worker_count()
    if workers <= 1 or len(sweep) <= 1:
        return [one(s) for s in sweep]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, sweep))


@dataclass(frozen=True)
class BoundaryFit:
    lam: float
    gamma: float
    max_residual: float

    def __call__(self, s: float) -> float:
        return max(0.0, self.lam * s + self.gamma)

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "gamma": self.gamma, "max_residual": self.max_residual}


def fit_truncated_affine(samples: Sequence[tuple[float, float]], tol: float | None = None) -> BoundaryFit:
    """Least-squares ``max(0, lambda * s + gamma)`` through the samples.

    The affine part is fitted on the strictly positive samples; the residual is
    measured on all of them.  Raises NonLinearBoundary when it exceeds ``tol``.
    """
    tol = config.FIT_TOL if tol is None else tol
    pts = np.asarray(samples, dtype=float).reshape(-1, 2)
    positive = pts[pts[:, 1] > config.EPS_CMP]
    if len(pts) < 3 or len(positive) < 2 or np.ptp(positive[:, 0]) <= config.EPS_CMP:
        raise InsufficientSamples(f"need 3 samples with 2 distinct positive ones, got {len(pts)} "
                                  f"samples and {len(positive)} positive")
    design = np.column_stack([positive[:, 0], np.ones(len(positive))])
    (lam, gamma), *_ = np.linalg.lstsq(design, positive[:, 1], rcond=None)
    predicted = np.maximum(0.0, lam * pts[:, 0] + gamma)
    fit = BoundaryFit(float(lam), float(gamma), float(np.max(np.abs(predicted - pts[:, 1]))))
    if fit.max_residual > tol:
        raise NonLinearBoundary(f"best truncated affine fit misses by {fit.max_residual} > {tol}",
                                fit=fit.to_dict(), samples=pts.tolist())
    return fit


@dataclass(frozen=True)
class DerivativeReport:
    df_prime: float
    dg_prime: float
    residual: float
    both_positive: bool

    def to_dict(self) -> dict:
        return asdict(self)


def derivative_equality(oracle: TwoPlayerOracle, s: SBid, delta: float, probe_ceiling: float | None = None,
                        tol: float | None = None) -> DerivativeReport:
    """Compare the increments ``f'(s1 + delta) - f'(s1)`` and ``g'(s2 + delta) - g'(s2)`` by probing."""
    s1, s2 = s
    ceiling = default_probe_ceiling([s1 + delta, s2 + delta]) if probe_ceiling is None else probe_ceiling

    def pays(a: float, b: float) -> VirtualPayments:
        return virtual_payments(lambda t: oracle(t, (a, b)), ceiling, tol)

    base, right, up = pays(s1, s2), pays(s1 + delta, s2), pays(s1, s2 + delta)
    df, dg = right.p1 - base.p1, up.p2 - base.p2
    positive = min(base.p1, base.p2, right.p1, up.p2) > config.EPS_CMP
    return DerivativeReport(df, dg, abs(df - dg), positive)


@dataclass(frozen=True)
class SlopeReport:
    lambdas: tuple[float, ...]
    max_difference: float
    derivative: DerivativeReport | None

    def to_dict(self) -> dict:
        return {"lambdas": list(self.lambdas), "max_difference": self.max_difference,
                "derivative": None if self.derivative is None else self.derivative.to_dict()}


def slope_invariance_check(mech: NMechanism, base: RestrictedInstance, i: int, j: int,
                           tj_values: Sequence[float], si_values: Sequence[float], tol: float | None = None,
                           delta: float = 0.25) -> SlopeReport:
    """Fit lambda_i for each value of t_j and report the spread of the slopes.

    When the (i, j) cut has positive stand-alone thresholds for both tasks at
    the base s, the increments of f' and g' over ``delta`` are compared too.
    """
    lambdas = []
    for tj in tj_values:
        slice_base = base.with_task(j, t=float(tj))
        lambdas.append(fit_truncated_affine(boundary_scan(mech, i, si_values, slice_base), tol).lam)
    spread = float(max(lambdas) - min(lambdas)) if lambdas else 0.0

    derivative = None
    si, sj = base.s[i - 1], base.s[j - 1]
    if si + delta <= 1 and sj + delta <= 1:
        def cut(t: TwoTaskValuation, s: SBid) -> Bundle:
            return task_pair_cut(mech, base.with_task(i, s=s[0]).with_task(j, s=s[1]), i, j)(t)
        report = derivative_equality(cut, (si, sj), delta, _restricted_ceiling(base))
        derivative = report if report.both_positive else None
    return SlopeReport(tuple(lambdas), spread, derivative)


def extension_identity_residual(phi: MonotoneCurve, eta: MonotoneCurve, t: TwoTaskValuation) -> float:
    """Mismatch between the two ways of pricing the bundle through the one-task thresholds.

    Zero for every valid ``t`` is necessary for a task-independent rule to
    extend truthfully to non-additive t-bids.
    """
    needed = [(phi, t.t1), (eta, t.t12 - t.t1), (eta, t.t2), (phi, t.t12 - t.t2)]
    for curve, y in needed:
        if not curve.in_range(y):
            raise OutOfRange(f"{y} is outside the range {curve.y_range} of a threshold curve")
    left = phi.inverse(t.t1) + eta.inverse(t.t12 - t.t1)
    right = eta.inverse(t.t2) + phi.inverse(t.t12 - t.t2)
    return abs(left - right)


# ---------------------------------------------------------------------------
# How psi_i moves with the other task's bids


def psi_grid(mech: NMechanism, base: RestrictedInstance, i: int, j: int, tj_values: Sequence[float],
             sj_values: Sequence[float], tol: float | None = None) -> np.ndarray:
    """``out[a, b] = psi_i`` at ``s_j = sj_values[a]`` and ``t_j = tj_values[b]``."""
    return np.array([[boundary_at(mech, base.with_task(j, t=float(tj), s=float(sj)), i, tol)
                      for tj in tj_values] for sj in sj_values])


@dataclass(frozen=True)
class DichotomyReport:
    nondecreasing_in_tj: bool
    nondecreasing_in_sj: bool

    @property
    def holds(self) -> bool:
        return self.nondecreasing_in_tj or self.nondecreasing_in_sj


def dichotomy_check(mech: NMechanism, base: RestrictedInstance, i: int, j: int, tj_values: Sequence[float],
                    sj_values: Sequence[float], tol: float = 1e-6) -> DichotomyReport:
    """Is psi_i non-decreasing in t_j, or in s_j, at every sample point?"""
    grid = psi_grid(mech, base, i, j, sorted(tj_values), sorted(sj_values))
    in_tj = bool(np.all(np.diff(grid, axis=1) >= -tol))
    in_sj = bool(np.all(np.diff(grid, axis=0) >= -tol))
    return DichotomyReport(in_tj, in_sj)


SLOPE_BUCKETS = (-1.0, 0.0, 1.0)


def slope_bucket(slope: float, tol: float = 0.05) -> float | None:
    for b in SLOPE_BUCKETS:
        if abs(slope - b) <= tol:
            return b
    return None


def flat_heights(curve: Callable[[float], float], xs: Sequence[float], step: float = 1e-3,
                 bucket_tol: float = 0.05, merge_tol: float = 1e-5) -> list[float]:
    """Heights of the constant pieces of a piecewise-linear curve, found by forward differences."""
    heights: list[float] = []
    for x in xs:
        y = curve(x)
        if slope_bucket((curve(x + step) - y) / step, bucket_tol) == 0.0:
            if not any(abs(y - h) <= merge_tol for h in heights):
                heights.append(y)
    return sorted(heights)


@dataclass(frozen=True)
class ShiftReport:
    heights: tuple[tuple[float, ...], ...]
    max_drift: float

    def invariant(self, tol: float = 1e-5) -> bool:
        return self.max_drift <= tol


def rectilinear_shift_check(mech: NMechanism, base: RestrictedInstance, i: int, j: int,
                            tj_values: Sequence[float], sj_values: Sequence[float], step: float = 1e-3,
                            bucket_tol: float = 0.05) -> ShiftReport:
    """Constant-piece heights of psi_i as a function of t_j, for each s_j; they should not move."""
    per_sj = []
    for sj in sj_values:
        b = base.with_task(j, s=float(sj))
        per_sj.append(tuple(flat_heights(lambda x: boundary_at(mech, b.with_task(j, t=x), i), tj_values,
                                         step, bucket_tol)))
    drift = 0.0
    for a in per_sj:
        for b in per_sj:
            for h in a:
                drift = max(drift, min((abs(h - k) for k in b), default=float("inf")))
    return ShiftReport(tuple(per_sj), drift)
