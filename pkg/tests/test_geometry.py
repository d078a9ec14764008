import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from conftest import random_affine_params
from wmonlab.curves import MonotoneCurve
from wmonlab.errors import (InsufficientSamples, NonLinearBoundary, NonMonotoneInOwnBid, OutOfRange,
                            Undetermined)
from wmonlab.geometry import (CriticalProfile, FigureClass, boundary_at, boundary_scan, classify_figure,
                              critical_profile, derivative_equality, dichotomy_check,
                              extension_identity_residual, fit_truncated_affine, flat_heights, psi_grid,
                              rectilinear_shift_check, slope_bucket, slope_invariance_check, task_pair_cut)
from wmonlab.mechanisms import (AffineMin, AffineParams, Allocation, Bundling, Constant, CoupledAffine, PerPair,
                                PerTaskLinear, VirtualPayments, payments_affine)
from wmonlab.truthfulness import default_probe_ceiling
from wmonlab.valuations import Bundle, Instance, RestrictedInstance, TwoTaskValuation

T = TwoTaskValuation


def profile(mech, s, ceiling=None):
    return critical_profile(lambda t: mech(t, s), ceiling or default_probe_ceiling(s) + 10)


# -- critical profiles and figures

def test_vcg_profile_is_crossing():
    cp = profile(AffineMin(), (2, 3))
    assert (cp.f_prime, cp.g_prime, cp.f, cp.g) == pytest.approx((2, 3, 2, 3), abs=1e-6)
    assert classify_figure(cp) is FigureClass.CROSSING


def test_profile_from_payments_is_quasi_bundling():
    cp = CriticalProfile.from_payments(VirtualPayments(1, 1, 3))
    assert cp.f == 2 and cp.f > cp.f_prime
    assert classify_figure(cp) is FigureClass.QUASI_BUNDLING


def test_bundling_profile_reports_beyond_notation():
    cp = profile(Bundling(MonotoneCurve.identity()), (1, 1), 30)
    assert (cp.f_prime, cp.g_prime) == (0, 0)
    assert cp.f == pytest.approx(2, abs=1e-6) and cp.g == pytest.approx(2, abs=1e-6)
    assert cp.beyond_notation
    assert classify_figure(cp) is FigureClass.QUASI_BUNDLING


@pytest.mark.parametrize("values, expected", [
    ((1, 1, 2, 2), FigureClass.QUASI_BUNDLING),
    ((2, 2, 1, 1), FigureClass.QUASI_FLIPPING),
    ((1, 2, 1, 2), FigureClass.CROSSING),
])
def test_classify_examples(values, expected):
    assert classify_figure(CriticalProfile(*values)) is expected


def test_classify_refuses_to_guess():
    with pytest.raises(Undetermined):
        classify_figure(CriticalProfile(0, 0, None, None))


def test_one_sided_profile_uses_g():
    assert classify_figure(CriticalProfile(1, 2, None, 3)) is FigureClass.QUASI_BUNDLING


def analytic_figure(p, s):
    pay = payments_affine(p, s)
    diff = pay.p1 - (pay.p12 - pay.p2)
    return diff, (FigureClass.QUASI_BUNDLING if diff < 0 else FigureClass.QUASI_FLIPPING if diff > 0
                  else FigureClass.CROSSING)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_affine_classification_matches_payments(seed):
    rng = np.random.default_rng(seed)
    p = random_affine_params(rng)
    s = tuple(float(x) for x in rng.uniform(0, 3, 2))
    diff, expected = analytic_figure(p, s)
    assume(abs(diff) > 1e-4)
    assert classify_figure(profile(AffineMin(p), s)) is expected


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000))
def test_profile_signs_agree(seed):
    rng = np.random.default_rng(seed)
    s = tuple(float(x) for x in rng.uniform(0, 3, 2))
    cp = profile(AffineMin(random_affine_params(rng)), s)
    assert cp.f_prime >= 0 and cp.g_prime >= 0
    if cp.f is not None and cp.g is not None:
        a, b = cp.f_prime - cp.f, cp.g_prime - cp.g
        assert abs(a - b) <= 1e-5 or a * b > 0


# -- boundaries and fits

BASE = RestrictedInstance(4, (0.3, 0.3, 0.1), (0.6, 0.5, 0.9))


def test_boundary_scan_identity_threshold():
    got = boundary_scan(PerTaskLinear(1, 0), 1, [0.2, 0.5, 0.8], BASE)
    assert [psi for _, psi in got] == pytest.approx([0.2, 0.5, 0.8], abs=1e-6)


def test_boundary_scan_truncated_threshold():
    got = boundary_scan(PerTaskLinear(2, -0.5), 1, [0.1, 0.5], BASE)
    assert [psi for _, psi in got] == pytest.approx([0, 0.5], abs=1e-6)


def test_boundary_of_constant_empty_is_zero():
    mech = PerPair(Constant(Bundle.EMPTY))
    assert all(psi == 0 for _, psi in boundary_scan(mech, 2, [0.1, 0.6, 1.0], BASE))


def test_boundary_reports_non_monotone_rule():
    def odd(inst: Instance) -> Allocation:
        # task 1 goes to the t-player only when its value is large
        won = 1 if inst.t.pairs[0].t1 > 1 else 0
        return Allocation.from_pair_bundles([Bundle(2 | won)] + [Bundle.TWO] * (inst.n_pairs - 1))
    with pytest.raises(NonMonotoneInOwnBid):
        boundary_at(odd, BASE, 1)


def test_fit_recovers_truncated_affine():
    xs = np.linspace(0, 1, 11)
    fit = fit_truncated_affine([(x, max(0, 2 * x - 0.5)) for x in xs])
    assert (fit.lam, fit.gamma) == pytest.approx((2, -0.5), abs=1e-9)
    assert fit.max_residual <= 1e-6


def test_fit_rejects_square():
    with pytest.raises(NonLinearBoundary):
        fit_truncated_affine([(x, x * x) for x in np.linspace(0.5, 1.5, 11)], 1e-3)


def test_fit_needs_positive_samples():
    with pytest.raises(InsufficientSamples):
        fit_truncated_affine([(x, 0.0) for x in np.linspace(0, 1, 5)])


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 5), st.floats(-1, 1))
def test_fit_predicts_within_residual(lam, gamma):
    xs = np.linspace(0, 1, 11)
    samples = [(x, max(0.0, lam * x + gamma)) for x in xs]
    assume(sum(v > 1e-6 for _, v in samples) >= 2)
    fit = fit_truncated_affine(samples)
    assert all(abs(fit(x) - v) <= fit.max_residual + 1e-12 for x, v in samples)


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 3), st.floats(-0.5, 0.5), st.integers(0, 1000))
def test_psi_is_nondecreasing_in_own_s(lam, gamma, seed):
    rng = np.random.default_rng(seed)
    base = RestrictedInstance(3, tuple(rng.uniform(0, 1, 2)), tuple(rng.uniform(0, 1, 2)))
    mech = CoupledAffine(AffineParams(), 1, 2, tuple(rng.uniform(-0.3, 0.3, 4)))
    for m in (PerTaskLinear(lam, gamma), mech):
        psi = [v for _, v in boundary_scan(m, 1, np.linspace(0, 1, 6), base)]
        assert np.all(np.diff(psi) >= -1e-6)


# -- slopes and increments

def test_slope_invariance_per_task_linear():
    rep = slope_invariance_check(PerTaskLinear(1.5, -0.1), BASE, 1, 2, [0.1, 0.5, 1.5], np.linspace(0.2, 1, 5))
    assert rep.max_difference <= 1e-6
    assert all(lam == pytest.approx(1.5, abs=1e-5) for lam in rep.lambdas)


def test_slope_invariance_flags_doubling_slope():
    def doubling(inst: Instance) -> Allocation:
        lam = 2.0 if inst.t.pairs[1].t1 > 1 else 1.0
        return PerTaskLinear((lam, 1.0, 1.0), 0.0)(inst)
    rep = slope_invariance_check(doubling, BASE, 1, 2, [0.5, 1.5], np.linspace(0.2, 1, 5))
    assert rep.max_difference == pytest.approx(1.0, abs=1e-5)


def test_affine_increments_agree():
    p = AffineParams(1.3, 0.7, gamma12=0.1, gamma1=0.2, gamma2=-0.1, gamma_empty=0)
    rep = derivative_equality(AffineMin(p), (1.0, 1.5), 0.25, tol=1e-10)
    assert rep.both_positive
    assert rep.residual <= 1e-9
    assert rep.df_prime == pytest.approx(0.7 / 1.3 * 0.25, abs=1e-9)


def test_slope_report_includes_increment_on_coupled_cut():
    base = RestrictedInstance(3, (0.3, 0.3), (0.5, 0.5))
    rep = slope_invariance_check(CoupledAffine(coupling=(0, 0, 0, 0.2)), base, 1, 2, [0.1, 0.3],
                                 np.linspace(0.3, 1, 5))
    assert rep.derivative is not None and rep.derivative.residual <= 1e-6


def test_task_pair_cut_matches_full_run():
    cut = task_pair_cut(PerTaskLinear(1, 0), BASE, 1, 3)
    # s_1 = 0.6 and s_3 = 0.9 are the thresholds
    assert cut(T(0.7, 0.5, 1.2)) is Bundle.TWO
    assert cut(T(0.1, 0.95, 1.05)) is Bundle.ONE
    assert cut(T(0.5, 0.5, 1.0)) is Bundle.BOTH


# -- extension identity

def test_identity_residual_vanishes_for_identity():
    ident = MonotoneCurve.identity()
    for t in (T(0.2, 0.3, 0.4), T(1, 2, 2.5), T(0, 0, 0)):
        assert extension_identity_residual(ident, ident, t) <= 1e-12


def test_identity_residual_square_example():
    sq = MonotoneCurve.sampled(lambda x: x * x, np.linspace(0, 1, 4001))
    res = extension_identity_residual(sq, sq, T(0.25, 0.49, 0.64))
    expected = abs(math.sqrt(0.25) + math.sqrt(0.39) - math.sqrt(0.49) - math.sqrt(0.15))
    assert res > 0.03
    assert res == pytest.approx(expected, abs=1e-3)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_identity_residual_vanishes_on_additive_bids(a, b):
    sq = MonotoneCurve.sampled(lambda x: x * x, np.linspace(0, 2, 801))
    assert extension_identity_residual(sq, sq, T(a, b, a + b)) <= 1e-9


def test_identity_residual_out_of_range():
    sq = MonotoneCurve.sampled(lambda x: x * x, np.linspace(0, 1, 11))
    with pytest.raises(OutOfRange):
        extension_identity_residual(sq, sq, T(2, 2, 3))


# -- how psi_i reacts to the other task

def test_dichotomy_on_coupled_cuts():
    tj = np.linspace(0, 1.2, 7)
    for coupling in ((0, 0, 0, -0.3), (0, 0, 0, 0.3), (0, 0.1, 0, -0.3), (0, 0, 0, 0)):
        rep = dichotomy_check(CoupledAffine(coupling=coupling), BASE, 1, 2, tj, [0.3, 0.5, 0.8])
        assert rep.holds


def test_bundling_cut_is_monotone_in_s():
    rep = dichotomy_check(CoupledAffine(coupling=(0, 0, 0, -0.3)), BASE, 1, 2, np.linspace(0, 1.2, 7), [0.3, 0.8])
    assert rep.nondecreasing_in_sj and not rep.nondecreasing_in_tj


def test_psi_grid_shape():
    assert psi_grid(PerTaskLinear(1, 0), BASE, 1, 2, [0.1, 0.2, 0.3], [0.4, 0.5]).shape == (2, 3)


def test_flat_heights_of_clamp():
    heights = flat_heights(lambda x: min(max(x, 0.3), 0.6), np.linspace(0, 1, 21))
    assert heights == pytest.approx([0.3, 0.6])
    assert slope_bucket(1.02) == 1.0 and slope_bucket(0.5) is None


@pytest.mark.parametrize("coupling, sj", [((0, 0, 0, -0.3), [0.3, 0.5, 0.8]), ((0, 0, 0, 0.3), [0.5, 0.8]),
                                          ((0, 0.1, 0, -0.3), [0.3, 0.8])])
def test_rectilinear_shift_keeps_flat_heights(coupling, sj):
    rep = rectilinear_shift_check(CoupledAffine(coupling=coupling), BASE, 1, 2, np.linspace(0, 1.2, 25), sj)
    assert all(len(h) >= 1 for h in rep.heights)
    assert rep.invariant()


def test_parallel_scan_matches_serial(monkeypatch):
    sweep = np.linspace(0, 1, 6)
    serial = boundary_scan(PerTaskLinear(2, -0.5), 1, sweep, BASE)
    monkeypatch.setenv("WMONLAB_THREADS", "3")
    assert boundary_scan(PerTaskLinear(2, -0.5), 1, sweep, BASE) == serial
