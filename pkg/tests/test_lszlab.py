"""Finite-time multipliers, PV limits, decay bounds."""
import math

import numpy as np
import pytest
from scipy import special

from qftscat.formfactor import eval_FG_n
from qftscat.kinematics import CutoffSpec, WavePacket, omega
from qftscat.lszlab import (
    MultiTimeSchedule,
    TimeMultiplier,
    chi_t,
    convergence_study,
    finite_time_pairing,
    l1_fourier_bound,
    pv_limit_demo,
    pv_oscillatory_integral,
    riemann_lebesgue_decay,
    sokhotsky_check,
)
from qftscat.structure import SpectralDensity


def _gauss(x):
    return np.exp(-0.5 * np.asarray(x) ** 2)


def test_chi_t_is_one_on_shells(params):
    cutoff = CutoffSpec.for_params(params)
    for k1 in (-0.8, 0.0, 1.3):
        w = float(omega(k1, params.m))
        for sign in (1.0, -1.0):
            k = np.array([sign * w, k1])
            for label in ("in", "out"):
                for t in (0.0, 17.3, 1000.0):
                    assert abs(chi_t(label, k, t, params, cutoff) - 1.0) < 1e-14
    # loc is identically one
    k = np.array([[0.3, 0.1], [5.0, -2.0]])
    assert np.all(chi_t("loc", k, 5.0, params, cutoff) == 1.0)
    with pytest.raises(ValueError):
        chi_t("bad", k, 0.0, params, cutoff)


def test_chi_t_vanishes_off_window(params):
    cutoff = CutoffSpec.for_params(params)
    k = np.array([3.0, 0.0])  # k^2 - m^2 = 8, far outside the cutoff window
    assert chi_t("in", k, 2.0, params, cutoff) == 0.0
    assert abs(chi_t("out", k, 2.0, params, cutoff)) == 0.0


def test_time_multiplier_and_schedule(params):
    cutoff = CutoffSpec.for_params(params)
    mult = TimeMultiplier("in", 3.0, params, cutoff)
    k = np.array([float(omega(0.4, params.m)), 0.4])
    assert abs(mult(k) - 1.0) < 1e-14
    sched = MultiTimeSchedule.from_base(10.0, (0, 2, 1))
    assert sched.times == (10.0, 40.0, 20.0)


def test_finite_time_two_point_is_static(pair, ev_rho):
    # on both shells chi_t = 1 exactly, and the cutoff kills the continuum
    a, b = pair
    static = eval_FG_n(["in", "out"], [a, b], ev_rho)
    for t in (1.0, 25.0):
        v = finite_time_pairing(["in", "out"], [a, b], [t, t], ev_rho)
        assert abs(v - static) < 1e-12 * abs(static)


def test_finite_time_vanishes_on_empty_phase_space(trio_scatter, ev):
    v = finite_time_pairing(["in", "in", "out"], list(trio_scatter), [5.0] * 3, ev)
    assert v == 0.0


def test_finite_time_argument_validation(pair, ev):
    with pytest.raises(ValueError):
        finite_time_pairing(["in"], list(pair), [1.0, 1.0], ev)
    with pytest.raises(ValueError):
        finite_time_pairing(["in", "out"], list(pair), [1.0], ev)


def test_convergence_study_exact_case(pair, ev):
    # the two-point pairing is exactly time independent: zero error, flat
    # envelope, ordering-independent limit
    a, b = pair
    target = eval_FG_n(["in", "out"], [a, b], ev)
    report = convergence_study(["in", "out"], [a, b], ev, [1.0, 10.0, 100.0],
                               target=target, window_points=2)
    first = list(report.values)[0]
    assert np.max(report.abs_err[first]) < 1e-12 * abs(target)
    assert report.envelope_nonincreasing
    assert report.ordering_spread < 1e-12 * abs(target)


def test_pv_oscillatory_integral_analytic():
    # PV int e^{ixt} e^{-x^2/2}/x dx = i pi erf(t/sqrt(2))
    for t in (0.5, 2.0, 8.0):
        val = pv_oscillatory_integral(_gauss, t)
        exact = 1j * math.pi * special.erf(t / math.sqrt(2.0))
        assert abs(val - exact) < 1e-9


def test_pv_limit_demo_converges():
    report = pv_limit_demo(_gauss, [1.0, 10.0, 100.0])
    key = (0,)
    assert report.envelope_nonincreasing
    assert report.abs_err[key][-1] < 1e-6 * abs(report.target)
    assert abs(report.target - 1j * math.pi) < 1e-15


def test_sokhotsky_identity_small_eps():
    lhs, rhs, diff = sokhotsky_check(_gauss, 1e-7)
    assert diff < 1e-6
    # the deficit is the exact smearing floor sqrt(2 pi) eps |f(0)|
    for eps in (1e-4, 1e-5, 1e-6):
        _, _, d = sokhotsky_check(_gauss, eps)
        floor = math.sqrt(2 * math.pi) * eps
        assert abs(d - floor) < 0.05 * floor


def test_sokhotsky_identity_asymmetric_function():
    g = lambda x: np.exp(-0.5 * (np.asarray(x) - 0.3) ** 2)
    _, _, d = sokhotsky_check(g, 1e-7)
    assert d < 1e-6


def test_riemann_lebesgue_trivial_rho(pair, ev, params):
    rho = SpectralDensity.zero(params)
    report = riemann_lebesgue_decay(rho, list(pair), [1.0, 10.0], ev)
    assert np.all(report.abs_err[(0,)] == 0.0)
    assert report.envelope_nonincreasing


def test_riemann_lebesgue_decays(params, ev_rho):
    a = WavePacket(center=np.array([-1.6, 0.4]), width=0.4)
    b = WavePacket(center=np.array([1.6, -0.4]), width=0.4)
    tg = np.array([0.0, 1.0, 30.0])
    report = riemann_lebesgue_decay(ev_rho.rho, [a, b], tg, ev_rho)
    vals = report.values[(0,)]
    assert abs(vals[0]) > 0
    assert abs(vals[2]) < 0.05 * abs(vals[0])


def test_l1_fourier_bound_gaussian():
    g = WavePacket(center=np.array([0.0]), width=1.0)
    lhs, rhs, ok = l1_fourier_bound(g)
    assert ok
    assert abs(lhs - math.sqrt(2 * math.pi)) < 1e-8
    assert lhs <= rhs


def test_l1_fourier_bound_polynomial_packet():
    from qftscat.polymath import Poly

    pk = WavePacket(center=np.array([0.6]), width=0.5,
                    poly=Poly.variable(1, 0, 1.0) + Poly.constant(1, 0.3))
    lhs, rhs, ok = l1_fourier_bound(pk)
    assert ok and lhs <= rhs


def test_l1_fourier_bound_requires_1d(pair):
    with pytest.raises(ValueError):
        l1_fourier_bound(pair[0])
