"""Non-decreasing piecewise-linear curves (the thresholds xi, phi, eta)."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import config
from .errors import OutOfRange


@dataclass(frozen=True)
class MonotoneCurve:
    """Piecewise-linear interpolation between breakpoints, constant outside them.

    A jump at ``x0`` is written as two breakpoints ``(x0, low)`` and
    ``(x0 + EPS_CMP, high)``; evaluating exactly at ``x0`` gives the lower branch.
    """

    xs: tuple[float, ...]
    ys: tuple[float, ...]

    def __post_init__(self):
        xs = tuple(float(x) for x in self.xs)
        ys = tuple(float(y) for y in self.ys)
        if len(xs) != len(ys) or not xs:
            raise ValueError("a curve needs at least one breakpoint and matching x/y lists")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("breakpoint x values must be strictly increasing")
        if any(b < a for a, b in zip(ys, ys[1:])):
            raise ValueError("breakpoint y values must be non-decreasing")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @classmethod
    def from_points(cls, points: Sequence[Sequence[float]]) -> MonotoneCurve:
        return cls(tuple(p[0] for p in points), tuple(p[1] for p in points))

    @classmethod
    def linear(cls, slope: float = 1.0, intercept: float = 0.0, lo: float = 0.0, hi: float = 1e6) -> MonotoneCurve:
        return cls((lo, hi), (slope * lo + intercept, slope * hi + intercept))

    @classmethod
    def identity(cls, hi: float = 1e6) -> MonotoneCurve:
        return cls.linear(1.0, 0.0, 0.0, hi)

    @classmethod
    def constant(cls, value: float) -> MonotoneCurve:
        return cls((0.0,), (value,))

    @classmethod
    def sampled(cls, fn: Callable[[float], float], xs: Sequence[float]) -> MonotoneCurve:
        """Tabulate ``fn`` at ``xs``; the table is exact at every listed x."""
        xs = sorted(set(float(x) for x in xs))
        return cls(tuple(xs), tuple(float(fn(x)) for x in xs))

    @property
    def points(self) -> list[list[float]]:
        return [[x, y] for x, y in zip(self.xs, self.ys)]

    @property
    def y_range(self) -> tuple[float, float]:
        return self.ys[0], self.ys[-1]

    def __call__(self, x: float) -> float:
        xs, ys = self.xs, self.ys
        if x <= xs[0]:
            return ys[0]
        if x >= xs[-1]:
            return ys[-1]
        k = bisect.bisect_right(xs, x)
        x0, x1, y0, y1 = xs[k - 1], xs[k], ys[k - 1], ys[k]
        if x == x0:
            return y0
        return y0 + (y1 - y0) * (x - x0) / (x1 - x0)

    def evaluate(self, x) -> np.ndarray:
        return np.interp(np.asarray(x, dtype=float), self.xs, self.ys)

    def inverse(self, y: float) -> float:
        """Smallest x with ``curve(x) >= y``; flat pieces map to their left endpoint."""
        lo, hi = self.y_range
        tol = config.EPS_CMP
        if y < lo - tol or y > hi + tol:
            raise OutOfRange(f"{y} is outside the curve's range [{lo}, {hi}]")
        ys, xs = self.ys, self.xs
        k = bisect.bisect_left(ys, y)
        if k == 0:
            return xs[0]
        if k >= len(ys):
            k = len(ys) - 1
            while k > 0 and ys[k - 1] == ys[-1]:
                k -= 1
            return xs[k]
        y0, y1 = ys[k - 1], ys[k]
        return xs[k - 1] + (y - y0) * (xs[k] - xs[k - 1]) / (y1 - y0)

    def in_range(self, y: float) -> bool:
        lo, hi = self.y_range
        return lo - config.EPS_CMP <= y <= hi + config.EPS_CMP
