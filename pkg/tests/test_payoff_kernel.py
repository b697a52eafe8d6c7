from __future__ import annotations

import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sabrlab.payoff_kernel import (
    DEFAULT_QUAD,
    BranchError,
    DomainError,
    ModelParams,
    QuadSpec,
    check_lemma1,
    eval_G_complex,
    eval_g,
    eval_g0,
    eval_g_inf,
    eval_g_unit,
    eval_g_with_error,
    eval_h,
    g0_bound,
    imaginary_axis_integral,
    mckean_tail,
    payoff_bound,
    quadrant,
    sqrt_plus,
)

SQ2 = math.sqrt(2.0)


def g_oracle(u, sigma0, s_minus=0.0, unit=False, dps=30):
    """Tanh-sinh quadrature of the payoff in its original variable."""
    mpmath.mp.dps = dps
    u = mpmath.mpf(u)
    sm = mpmath.mpf(s_minus)

    def h(s):
        if unit:
            return mpmath.mpf(1)
        if s == 0:
            return mpmath.mpf(sigma0) / 2
        r = mpmath.sqrt(mpmath.sinh(s) ** 2 - mpmath.sinh(sm) ** 2)
        return mpmath.sin(sigma0 / 2 * r) / mpmath.sinh(s)

    # cosh u - cosh s in product form keeps full precision next to s = u
    def f(s):
        d = 2 * mpmath.sinh((u + s) / 2) * mpmath.sinh((u - s) / 2)
        return h(s) / mpmath.sqrt(d) if d > 0 else mpmath.mpf(0)
    # split at the zeros of the sine factor so each piece is one oscillation
    pts = [sm]
    if not unit:
        R = mpmath.sqrt(mpmath.sinh(u) ** 2 - mpmath.sinh(sm) ** 2)
        for m in range(1, int(sigma0 * R / (2 * mpmath.pi)) + 1):
            z = mpmath.asinh(mpmath.sqrt(mpmath.sinh(sm) ** 2 + (2 * mpmath.pi * m / sigma0) ** 2))
            if sm < z < u:
                pts.append(z)
    pts.append(u)
    return float(mpmath.sinh(u) * mpmath.quad(f, pts))


# ---------------------------------------------------------------- parameters


def test_model_params_validation():
    with pytest.raises(DomainError):
        ModelParams(0.0)
    with pytest.raises(DomainError):
        ModelParams(0.3, omega=-1)
    with pytest.raises(DomainError):
        ModelParams(0.3, K=0.0)
    p = ModelParams(0.3, S0=2.0)
    assert p.K == 2.0 and p.is_atm and p.s_minus == 0.0


def test_rescaling():
    p, T = ModelParams(0.6, omega=2.0).rescaled(0.25)
    assert (p.sigma0, p.omega, T) == (0.3, 1.0, 1.0)


def test_quadspec_validation():
    with pytest.raises(DomainError):
        QuadSpec(abs_tol=0.0)
    with pytest.raises(DomainError):
        QuadSpec(max_subdiv=0)


# ---------------------------------------------------------------- h


def test_h_limit_at_zero():
    assert eval_h(1e-12, ModelParams(0.5)) == pytest.approx(0.25, rel=1e-12)
    assert eval_h(0.0, ModelParams(0.5)) == 0.25


def test_h_bound_random():
    rng = np.random.default_rng(3)
    for sigma0 in (0.1, 1.0, 10.0, 100.0):
        s = rng.uniform(1e-6, 10.0, 10_000)
        assert np.all(np.abs(eval_h(s, ModelParams(sigma0))) <= sigma0 / 2 * (1 + 1e-15))


def test_h_branch_continuity():
    p = ModelParams(0.5)
    assert eval_h(1.0, p) == pytest.approx(math.sin(0.25 * math.sinh(1.0)) / math.sinh(1.0), rel=1e-15)
    # the small-argument branch switches where sigma0/2 sinh s = 1e-3
    s_edge = math.asinh(2e-3 / 0.5)
    below = eval_h(np.nextafter(s_edge, 0), p)
    above = eval_h(np.nextafter(s_edge, 1), p)
    assert abs(below - above) <= 1e-13


@settings(max_examples=60)
@given(st.floats(1e-6, 12.0), st.floats(0.01, 300.0))
def test_h_bound_property(s, sigma0):
    assert abs(eval_h(s, ModelParams(sigma0))) <= sigma0 / 2 * (1 + 1e-15)


# ---------------------------------------------------------------- g


def test_g_small_u():
    u, s = 1e-3, 0.5
    assert eval_g(u, ModelParams(s)) == pytest.approx(math.pi / (2 * SQ2) * s * u, rel=1e-4)


@pytest.mark.parametrize("u,sigma0", [(2.0, 0.5), (0.7, 1.3), (3.0, 5.0), (1.5, 40.0)])
def test_g_against_tanh_sinh(u, sigma0):
    assert eval_g(u, ModelParams(sigma0)) == pytest.approx(g_oracle(u, sigma0), rel=1e-9)


def test_g_strike_against_tanh_sinh():
    p = ModelParams(0.3, K=1.1)
    assert eval_g(1.2, p) == pytest.approx(g_oracle(1.2, 0.3, p.s_minus), rel=1e-9)
    assert eval_g(0.5 * p.s_minus, p) == 0.0


def test_g_domain():
    with pytest.raises(DomainError):
        eval_g(0.0, ModelParams(0.5))
    with pytest.raises(DomainError):
        eval_g(np.array([1.0, -1.0]), ModelParams(0.5))


def test_g_error_estimate_is_honest():
    vals, errs = eval_g_with_error(np.linspace(0.1, 6, 30), ModelParams(30.0))
    ref = np.array([g_oracle(u, 30.0, dps=25) for u in np.linspace(0.1, 6, 30)[::6]])
    assert np.all(np.abs(vals[::6] - ref) <= 1e-11 * np.maximum(1, np.abs(ref)))
    assert np.all(errs >= 0)


def test_g_bound_on_grid():
    u = np.linspace(0.01, 10.0, 200)
    for sigma0 in (0.1, 0.5, 2.0, 20.0):
        g = eval_g(u, ModelParams(sigma0))
        assert np.all(g <= payoff_bound(u, sigma0))


@settings(max_examples=40)
@given(st.floats(0.01, 8.0), st.floats(0.01, 60.0))
def test_g_bound_property(u, sigma0):
    assert eval_g(u, ModelParams(sigma0)) <= payoff_bound(u, sigma0)


def test_unit_kernel_quadrature_matches_closed_form():
    u = np.linspace(0.1, 5.0, 50)
    assert np.allclose(eval_g_unit(u), eval_g0(u), rtol=1e-9, atol=0)


# ---------------------------------------------------------------- g0 and g_inf


def test_g0_small_u():
    assert eval_g0(1e-8) / 1e-8 == pytest.approx(math.pi / SQ2, rel=1e-15)
    assert eval_g0(1e-3) / 1e-3 == pytest.approx(math.pi / SQ2 * (1 + 5 / 48 * 1e-6), rel=1e-12)


@pytest.mark.parametrize("u", [0.3, 1.0, 2.5, 6.0])
def test_g0_against_tanh_sinh(u):
    assert eval_g0(u) == pytest.approx(g_oracle(u, 0.0, unit=True), rel=1e-10)


def test_g0_incomplete_elliptic_form():
    # R_F(0, cosh^2(u/2), 1) = K(m) / cosh(u/2) with m = tanh^2(u/2)
    mpmath.mp.dps = 30
    for u in (0.4, 1.7, 4.0):
        ref = SQ2 * mpmath.sinh(u) * mpmath.ellipk(mpmath.tanh(u / 2) ** 2) / mpmath.cosh(u / 2)
        assert eval_g0(u) == pytest.approx(float(ref), rel=1e-14)


def test_g0_corrected_bound():
    u = np.linspace(0.01, 10.0, 300)
    assert np.all(eval_g0(u) <= g0_bound(u))


@pytest.mark.xfail(strict=True, reason="g0/u tends to pi/sqrt2 > sqrt2 at small u; the valid constant is 2 sqrt2; see decisions ledger")
def test_g0_bound_literal():
    u = np.linspace(0.01, 10.0, 300)
    assert np.all(eval_g0(u) <= SQ2 * u * np.cosh(u / 2))


def test_g_inf_values():
    assert eval_g_inf(0.0) == pytest.approx(math.pi / SQ2, rel=1e-15)
    assert eval_g_inf(2.0) == pytest.approx(math.pi / SQ2 * math.cosh(1.0), rel=1e-15)


def test_g_approaches_g_inf():
    d = [abs(eval_g(1.0, ModelParams(s)) - eval_g_inf(1.0)) for s in (10.0, 40.0, 160.0)]
    # envelope ~ sigma0^(-1/2); sample points sit at different oscillation phases
    env = [2 * math.sqrt(math.pi) / math.sqrt(s * math.sinh(2.0)) for s in (10.0, 40.0, 160.0)]
    assert all(x <= 1.1 * e for x, e in zip(d, env))
    assert d[2] < d[0]


# ---------------------------------------------------------------- complex continuation


def test_sqrt_plus_cut():
    assert sqrt_plus(-4) == pytest.approx(2j)
    assert sqrt_plus(complex(4, 1e-300)).real > 0
    assert sqrt_plus(complex(4, -1e-300)).real < 0
    assert sqrt_plus(1j).imag > 0 and sqrt_plus(-1j).imag > 0


def test_quadrant_rules():
    assert quadrant(1j) == "Q1"
    assert quadrant(-1j) == "Q4"
    assert quadrant(-1 + 0j) == "Q2"
    assert quadrant(-1 - 1j) == "Q3"
    with pytest.raises(DomainError):
        quadrant(complex(0, math.pi))


@pytest.mark.parametrize("u", np.round(np.arange(0.1, 3.01, 0.3), 10))
def test_complex_matches_real_axis(u):
    p = ModelParams(0.5)
    assert abs(eval_G_complex(complex(u, 0.0), p).value - eval_g(u, p)) <= 1e-8
    assert abs(eval_G_complex(complex(u, -0.0), p).value - eval_g(u, p)) <= 1e-8


def test_complex_matches_series_off_axis():
    from sabrlab.series_engine import derive_payoff_series

    ps = derive_payoff_series(30)
    u = 0.7 + 1.3j
    series = 0.5 * sum(c * u ** (2 * k + 1) for k, c in enumerate(ps.coefficients(0.5)))
    assert abs(eval_G_complex(u, ModelParams(0.5)).value - series) <= 1e-12


def test_odd_and_conjugate_symmetry_random():
    rng = np.random.default_rng(11)
    p = ModelParams(0.8)
    for _ in range(100):
        u = complex(rng.uniform(-2, 2), rng.uniform(-3.0, 3.0))
        g = eval_G_complex(u, p).value
        assert abs(eval_G_complex(-u, p).value + g) <= 1e-10 * max(1, abs(g))
        assert abs(eval_G_complex(u.conjugate(), p).value - g.conjugate()) <= 1e-10 * max(1, abs(g))


def test_schwarz_in_first_quadrant_is_not_tautological():
    # Q4 values are produced by reflection; cross-check one against a direct
    # integral along the segment, where the path stays inside the strip.
    from scipy.integrate import quad as _quad

    p = ModelParams(0.5)
    u = 0.9 - 1.1j
    c = 0.25

    def f(w):
        s = w * u
        h = cmath.sin(c * cmath.sinh(s)) / cmath.sinh(s)
        return u * h / cmath.sqrt(cmath.cosh(u) - cmath.cosh(s))

    re = _quad(lambda w: f(w).real, 0, 1, limit=200, points=[0.999])[0]
    im = _quad(lambda w: f(w).imag, 0, 1, limit=200, points=[0.999])[0]
    direct = cmath.sinh(u) * complex(re, im)
    got = eval_G_complex(u, p).value
    # principal sqrt and the positive-cut sqrt agree up to a global sign here
    assert min(abs(got - direct), abs(got + direct)) <= 1e-6


def test_complex_domain():
    with pytest.raises(DomainError):
        eval_G_complex(complex(0.5, -math.pi), ModelParams(0.5))


@pytest.mark.parametrize("w", np.round(np.arange(0.0, 1.01, 0.2), 10))
def test_branch_lemma(w):
    assert check_lemma1(w, U=5.0, n=200)


def test_branch_lemma_detector_fires():
    # a point just above the real axis maps next to the positive real axis
    assert not check_lemma1(0.5, U=5.0, n=200, tol=1e-1)


def test_log_singularity_unit_kernel():
    ys = np.linspace(2.9, 3.1, 9)
    p = ModelParams(1.0)
    J = np.array([(eval_G_complex(1j * y, p, unit=True).value / (1j * math.sin(y))).real for y in ys])
    ref = SQ2 * np.log(8 / (math.pi - ys))
    assert np.all(np.abs(J / ref - 1) <= 0.05)


def test_log_singularity_sabr_slope():
    ys = np.linspace(2.9, 3.1, 9)
    sigma0 = 0.5
    J = np.array([imaginary_axis_integral(y, ModelParams(sigma0)) for y in ys])
    slope = np.polyfit(np.log(1 / (math.pi - ys)), J, 1)[0]
    # h(i t) = sigma0/2 * sinc-like factor tending to sigma0/2 * sin(sigma0/2 sin t)/(sigma0/2 sin t) -> sigma0/2 at t = pi
    assert slope == pytest.approx(SQ2 * sigma0 / 2, rel=0.05)


def test_imaginary_axis_domain():
    with pytest.raises(DomainError):
        imaginary_axis_integral(math.pi, ModelParams(0.5))


# ---------------------------------------------------------------- kernel tail


def test_kernel_tail_at_origin():
    for t in (0.1, 0.5, 2.0):
        assert mckean_tail(t, 0.0) == pytest.approx(1.0, abs=1e-12)


def test_kernel_tail_monotone():
    s = np.linspace(0, 5, 26)
    for t in (0.2, 1.0):
        G = [mckean_tail(t, x) for x in s]
        assert all(b < a for a, b in zip(G, G[1:]))
        assert all(0 < g <= 1 + 1e-12 for g in G)


def test_kernel_tail_far():
    t = 0.5
    assert mckean_tail(t, 10 * math.sqrt(t) + 10) <= 1e-8
    assert mckean_tail(t, 300.0) == 0.0 or mckean_tail(t, 300.0) < 1e-300


def test_kernel_tail_against_mpmath():
    mpmath.mp.dps = 30
    t, s = mpmath.mpf("0.5"), mpmath.mpf(1)
    f = lambda u: mpmath.exp(-u * u / (2 * t)) * mpmath.sinh(u) / mpmath.sqrt(mpmath.cosh(u) - mpmath.cosh(s))
    ref = mpmath.exp(-t / 8) / mpmath.sqrt(mpmath.pi * t) * mpmath.quad(f, [s, s + 1, mpmath.inf])
    assert mckean_tail(0.5, 1.0) == pytest.approx(float(ref), rel=1e-11)


def test_kernel_tail_domain():
    with pytest.raises(DomainError):
        mckean_tail(0.0, 1.0)
    with pytest.raises(DomainError):
        mckean_tail(1.0, -1.0)
