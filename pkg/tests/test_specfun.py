"""Special-function kernels against independent high-precision oracles."""

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from acmask.exceptions import ConvergenceError, DomainError
from acmask.specfun import (BESSEL_SWITCH, SeriesConfig, _ln_bessel_asymptotic,
                            _ln_bessel_series, bessel_i_asymptotic, chebyshev_rule,
                            gauss_chebyshev, kummer_1f1, laguerre_generalized, ln_bessel_i,
                            ln_kummer_1f1_int, marcum_p, marcum_q)

mpmath.mp.dps = 50


def bessel_series_oracle(v, z, terms=200):
    """``I_v(z)`` by its power series in 50-digit arithmetic."""
    z = mpmath.mpf(z)
    half = z / 2
    return mpmath.fsum(half ** (2 * k + v) / (mpmath.factorial(k) * mpmath.factorial(k + v))
                       for k in range(terms))


# ln_bessel_i ----------------------------------------------------------------

def test_ln_bessel_trivial_values():
    assert ln_bessel_i(0, 0.0) == 0.0
    assert ln_bessel_i(1, 0.0) == -math.inf


def test_ln_bessel_matches_series_oracle_at_30():
    ref = float(mpmath.log(bessel_series_oracle(0, 30)))
    assert abs(math.exp(ln_bessel_i(0, 30.0) - ref) - 1) <= 1e-10


@given(st.integers(0, 6), st.floats(1e-6, 700.0))
def test_ln_bessel_relative_accuracy(v, z):
    ref = float(mpmath.log(mpmath.besseli(v, z)))
    assert abs(ln_bessel_i(v, z) - ref) <= 1e-10


def test_ln_bessel_no_overflow_at_huge_argument():
    z = 1e6
    val = ln_bessel_i(0, z)
    assert math.isfinite(val)
    assert abs(val - (z - 0.5 * math.log(2 * math.pi * z))) < 1e-6


def test_ln_bessel_vectorized_shape():
    z = np.array([[0.0, 1.0], [60.0, 300.0]])
    out = ln_bessel_i(2, z)
    assert out.shape == z.shape
    assert out[0, 0] == -math.inf


@pytest.mark.parametrize("v", range(5))
def test_bessel_branches_agree_in_crossover_band(v):
    z = np.linspace(40.0, 60.0, 81)
    a = _ln_bessel_series(v, z)
    b = _ln_bessel_asymptotic(v, z)
    assert np.max(np.abs(np.exp(a - b) - 1)) <= 1e-8
    assert 40.0 < BESSEL_SWITCH < 60.0


def test_ln_bessel_rejects_negative_argument():
    with pytest.raises(DomainError):
        ln_bessel_i(0, -1.0)
    with pytest.raises(DomainError):
        ln_bessel_i(-1, 1.0)


# bessel_i_asymptotic --------------------------------------------------------

@pytest.mark.parametrize("v,z,q,tol", [(0, 50.0, 2, 1e-6), (2, 100.0, 3, 1e-5)])
def test_bessel_asymptotic_against_oracle(v, z, q, tol):
    ref = float(mpmath.besseli(v, z))
    assert abs(bessel_i_asymptotic(v, z, q) / ref - 1) <= tol


def test_bessel_asymptotic_literal_first_correction():
    # order 0, one term: 1 - (0 - 1) / (8z) = 1 + 1/(8z)
    z = 20.0
    ratio = bessel_i_asymptotic(0, z, 1) / (math.exp(z) / math.sqrt(2 * math.pi * z))
    assert ratio == pytest.approx(1 + 1 / (8 * z), rel=1e-15)


def test_bessel_asymptotic_rejects_small_argument():
    with pytest.raises(DomainError):
        bessel_i_asymptotic(0, 9.99, 2)


# marcum_q -------------------------------------------------------------------

def test_marcum_trivial_values():
    assert marcum_q(1, 0.0, math.sqrt(2)) == pytest.approx(math.exp(-1), abs=1e-15)
    for N in (1, 2, 5):
        assert marcum_q(N, 3.0, 0.0) == 1.0
        assert marcum_p(N, 3.0, 0.0) == 0.0


def test_marcum_against_density_quadrature():
    # Q_2(1.5, 2) = P(X > b^2) for X ~ ncx2(4, a^2)
    pdf = stats.ncx2(4, 1.5**2).pdf
    ref, _ = integrate.quad(pdf, 4.0, np.inf, epsabs=1e-14, epsrel=1e-13)
    assert abs(marcum_q(2, 1.5, 2.0) - ref) <= 1e-10


@given(st.integers(1, 6), st.floats(0.0, 30.0), st.floats(1e-3, 30.0))
def test_marcum_matches_noncentral_chi2(N, a, b):
    sf = float(stats.ncx2.sf(b * b, 2 * N, a * a)) if a > 0 else float(stats.chi2.sf(b * b, 2 * N))
    assert abs(marcum_q(N, a, b) - sf) <= 1e-10


def laguerre_marcum_oracle(N, a, b, terms=120):
    """``1 - Q_N(a, b)`` from the alternating Laguerre series in 80-digit arithmetic."""
    with mpmath.workdps(80):
        a2, b2 = mpmath.mpf(a) ** 2 / 2, mpmath.mpf(b) ** 2 / 2
        def lag(n):
            return mpmath.fsum(mpmath.binomial(n + N - 1, n - k) * (-a2) ** k / mpmath.factorial(k)
                               for k in range(n + 1))
        s = mpmath.fsum((-1) ** n * lag(n) / mpmath.factorial(N + n) * b2 ** (n + N)
                        for n in range(terms))
        return float(mpmath.exp(-a2) * s)


@pytest.mark.parametrize("N,a,b", [(1, 1.0, 0.8), (2, 2.0, 1.5), (3, 0.5, 2.5), (4, 3.0, 2.0)])
def test_marcum_p_against_laguerre_form(N, a, b):
    assert abs(marcum_p(N, a, b) - laguerre_marcum_oracle(N, a, b)) <= 1e-12


@given(st.integers(1, 4), st.floats(0.1, 5.0), st.floats(0.1, 5.0))
def test_marcum_reflection_identity(N, a, b):
    k = np.arange(1 - N, N)
    rhs = 1 + math.exp(-(a * a + b * b) / 2) * math.fsum(
        float((a / b) ** kk * mpmath.besseli(abs(kk), a * b)) for kk in k)
    assert abs(marcum_q(N, a, b) + marcum_q(N, b, a) - rhs) <= 1e-9


@pytest.mark.parametrize("N", [1, 2, 4])
def test_marcum_monotone(N):
    grid = np.linspace(0.0, 8.0, 41)
    for a in grid[::5]:
        q = marcum_q(N, a, grid)
        assert np.all(np.diff(q) <= 1e-15)
    for b in grid[1::5]:
        q = marcum_q(N, grid, b)
        assert np.all(np.diff(q) >= -1e-15)


def test_marcum_p_keeps_relative_precision_deep_in_lower_tail():
    ref = float(mpmath.quad(lambda x: mpmath.exp(-(x + 400) / 2) * mpmath.besseli(0, mpmath.sqrt(400 * x)) / 2,
                            [0, 0.01]))
    got = marcum_p(1, 20.0, 0.1)
    assert got > 0 and abs(got / ref - 1) < 1e-8


# kummer_1f1 -----------------------------------------------------------------

def test_kummer_trivial_values():
    assert kummer_1f1(2.5, 3.0, 0.0) == 1.0
    for b, z in [(1.0, 2.0), (3.0, 7.5), (2.0, -4.0)]:
        assert kummer_1f1(b, b, z) == pytest.approx(math.exp(z), rel=1e-14)


def test_kummer_against_extended_precision_sum():
    mpmath.mp.dps = 60
    a, b, z = mpmath.mpf(5), mpmath.mpf(2), mpmath.mpf("1.3")
    term, total = mpmath.mpf(1), mpmath.mpf(1)
    for n in range(500):
        term *= (a + n) * z / ((b + n) * (n + 1))
        total += term
    mpmath.mp.dps = 50
    assert abs(kummer_1f1(5, 2, 1.3) / float(total) - 1) <= 1e-14


@given(st.floats(0.5, 30.0), st.integers(1, 6), st.floats(0.0, 60.0))
def test_kummer_relative_accuracy(a, b, z):
    ref = float(mpmath.hyp1f1(a, b, z))
    assert abs(kummer_1f1(a, b, z) / ref - 1) <= 1e-10


@given(st.floats(1.0, 20.0), st.integers(1, 6), st.floats(0.0, 40.0))
def test_kummer_contiguous_relation(a, b, z):
    lhs = ((b - a) * kummer_1f1(a - 1, b, z) + (2 * a - b + z) * kummer_1f1(a, b, z)
           - a * kummer_1f1(a + 1, b, z))
    scale = abs(a * kummer_1f1(a + 1, b, z)) + abs((2 * a - b + z) * kummer_1f1(a, b, z))
    assert abs(lhs) <= 1e-8 * scale


def test_kummer_nonconvergence_and_domain():
    with pytest.raises(ConvergenceError):
        kummer_1f1(3.0, 1.0, 500.0, max_iter=5)
    with pytest.raises(DomainError):
        kummer_1f1(1.0, -2.0, 1.0)


@given(st.integers(1, 5), st.integers(0, 60), st.floats(0.0, 80.0))
def test_ln_kummer_int_matches_oracle(b, extra, z):
    a = b + extra
    ref = float(mpmath.log(mpmath.hyp1f1(a, b, z)))
    assert abs(ln_kummer_1f1_int(a, b, z) - ref) <= 1e-11 * max(1.0, abs(ref))


def test_ln_kummer_int_vectorized():
    a = np.array([3, 4, 10])
    out = ln_kummer_1f1_int(a, 3, 2.0)
    assert out.shape == (3,)
    assert out[0] == pytest.approx(2.0)


# laguerre_generalized -------------------------------------------------------

def test_laguerre_trivial_values():
    assert laguerre_generalized(0, 1.7, 3.2) == 1.0
    assert laguerre_generalized(1, 1.7, 3.2) == pytest.approx(1 + 1.7 - 3.2)


def laguerre_recurrence(n, alpha, x):
    prev, cur = 1.0, 1.0 + alpha - x
    if n == 0:
        return prev
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 + alpha - x) * cur - (k + alpha) * prev) / (k + 1)
    return cur


@pytest.mark.parametrize("n,alpha,x", [(4, 2.0, 0.7), (7, 0.0, 3.1), (10, 3.0, 1.2)])
def test_laguerre_against_recurrence(n, alpha, x):
    assert abs(laguerre_generalized(n, alpha, x) - laguerre_recurrence(n, alpha, x)) <= 1e-12 * max(
        1.0, abs(laguerre_recurrence(n, alpha, x)))


# quadrature -----------------------------------------------------------------

@pytest.mark.parametrize("L", [1, 7, 64])
def test_quadrature_rule_invariants(L):
    rule = chebyshev_rule(L)
    l = np.arange(1, L + 1)
    assert np.allclose(rule.nodes, np.cos(np.pi * (2 * l - 1) / (2 * L)), atol=0, rtol=0)
    assert np.all(rule.weights == np.pi / L)
    assert np.all(np.abs(rule.nodes) < 1)
    with pytest.raises(ValueError):
        rule.nodes[0] = 0.0


def test_gauss_chebyshev_trivial():
    rule = chebyshev_rule(64)
    assert gauss_chebyshev(rule, lambda y: np.ones_like(y)) == pytest.approx(math.pi, rel=1e-15)
    assert abs(gauss_chebyshev(rule, lambda y: y)) <= 1e-14


def test_gauss_chebyshev_reproduces_bessel():
    rule = chebyshev_rule(64)
    ref = math.pi * float(mpmath.besseli(0, 2))
    assert abs(gauss_chebyshev(rule, lambda y: np.exp(2 * y)) - ref) <= 1e-10 * ref
    for z in (0.5, 2.0, 10.0):
        got = gauss_chebyshev(rule, lambda y: np.exp(z * np.cos(np.arccos(y))))
        assert abs(got / (math.pi * float(mpmath.besseli(0, z))) - 1) <= 1e-8


def test_gauss_chebyshev_doubling_converges():
    f = lambda y: np.exp(3 * y) * np.cos(y)
    a = gauss_chebyshev(chebyshev_rule(32), f)
    b = gauss_chebyshev(chebyshev_rule(64), f)
    assert abs(a - b) <= 1e-12 * abs(b)


def test_quadrature_order_must_be_positive():
    with pytest.raises(DomainError):
        chebyshev_rule(0)


def test_series_config_defaults_and_validation():
    cfg = SeriesConfig()
    assert (cfg.max_terms, cfg.term_rel_tol, cfg.asymp_order, cfg.quad_order) == (20, 1e-12, 2, 64)
    for bad in ({"max_terms": 0}, {"term_rel_tol": 0.0}, {"asymp_order": 0}, {"quad_order": 0}):
        with pytest.raises(DomainError):
            SeriesConfig(**bad)
