import math

import numpy as np
import pytest

from wmonlab.curves import MonotoneCurve
from wmonlab.mechanisms import (AffineMin, AffineParams, Bundling, Constant, RelaxedAffineMin,
                                TaskIndependent)
from wmonlab.valuations import Bundle


def sqrt_curve(hi: float = 1.0, points: int = 2001) -> MonotoneCurve:
    xs = sorted(set(np.linspace(0.0, hi, points).tolist()) | {0.5})
    return MonotoneCurve.sampled(math.sqrt, xs)


def sqrt_relaxed_mechanism() -> RelaxedAffineMin:
    """Relaxed affine minimizer with a square-root bundling tail below s1 + s2 = 1."""
    return RelaxedAffineMin(AffineParams(1, 1, gamma12=0, gamma1=1, gamma2=1, gamma_empty=0), sqrt_curve())


def random_affine_params(rng: np.random.Generator) -> AffineParams:
    return AffineParams(mu_t=float(rng.uniform(0.5, 2.0)), mu_s=float(rng.uniform(0.5, 2.0)),
                        gamma12=float(rng.uniform(-1, 1)), gamma1=float(rng.uniform(-1, 1)),
                        gamma2=float(rng.uniform(-1, 1)), gamma_empty=float(rng.uniform(-1, 1)))


def truthful_zoo(seed: int = 7) -> dict:
    """Every implemented two-player family, keyed by a readable name."""
    rng = np.random.default_rng(seed)
    zoo = {"vcg": AffineMin()}
    for k in range(5):
        zoo[f"affine_{k}"] = AffineMin(random_affine_params(rng))
    zoo["relaxed_sqrt"] = sqrt_relaxed_mechanism()
    zoo["bundling_identity"] = Bundling(MonotoneCurve.identity())
    zoo["task_independent_linear"] = TaskIndependent(MonotoneCurve.linear(2.0, 0.5), MonotoneCurve.linear(2.0, -0.5))
    for b in Bundle:
        zoo[f"constant_{b.label}"] = Constant(b)
    return zoo


@pytest.fixture
def zoo():
    return truthful_zoo()


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, ok: bool, detail: str = "") -> None:
    """Log one PASS/FAIL line for the acceptance summary, then let the caller assert."""
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
