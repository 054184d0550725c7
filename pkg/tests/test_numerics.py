import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corrsense.errors import DomainError, PeakNotResolved
from corrsense.numerics import (X_MAX, bessel_j0, bessel_jn, fwhm, loglog_fit, periodogram,
                                periodogram_bin)

from oracles import bessel_jn_mp, bessel_series, periodogram_naive


def test_j0_frozen_values():
    assert bessel_j0(0.0) == 1.0
    assert bessel_j0(1.0) == pytest.approx(0.7651976865579666, abs=1e-15)
    assert abs(bessel_j0(2.404825557695773)) < 1e-15


@pytest.mark.parametrize("x", [0.1, 3.7, 7.99, 8.01, 12.3, 24.9, 25.1, 60.0, 448.0, 1999.0])
def test_j0_against_mpmath_across_branches(x):
    assert bessel_j0(x) == pytest.approx(bessel_jn_mp(0, x), abs=2e-14)


def test_j0_matches_series_oracle_on_small_arguments():
    xs = np.linspace(0, 30, 61)
    ref = np.array([bessel_series(0, x) for x in xs])
    assert np.max(np.abs(bessel_j0(xs) - ref)) < 2e-14


@pytest.mark.parametrize("n", [1, 2, 3, 7, 20, 55, 100])
@pytest.mark.parametrize("x", [0.3, 5.0, 9.5, 30.0, 150.0])
def test_jn_against_mpmath(n, x):
    assert bessel_jn(n, x) == pytest.approx(bessel_jn_mp(n, x), abs=1e-14)


def test_jn_parity_and_small_argument():
    assert bessel_jn(3, -2.0) == pytest.approx(-bessel_jn(3, 2.0), abs=0)
    assert bessel_jn(4, -2.0) == pytest.approx(bessel_jn(4, 2.0), abs=0)
    assert bessel_jn(5, 0.0) == 0.0


def test_j2_first_root():
    assert abs(bessel_jn(2, 5.135622301840683)) < 1e-15


def test_bessel_array_shape_preserved():
    x = np.linspace(0, 40, 12).reshape(3, 4)
    assert bessel_j0(x).shape == (3, 4)
    assert bessel_jn(2, x).shape == (3, 4)


@pytest.mark.parametrize("bad", [-1, 101, 2.5, True])
def test_jn_rejects_bad_order(bad):
    with pytest.raises(DomainError):
        bessel_jn(bad, 1.0)


def test_bessel_rejects_out_of_range_arguments():
    with pytest.raises(DomainError):
        bessel_j0(X_MAX * 1.01)
    with pytest.raises(DomainError):
        bessel_j0(float("nan"))


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 200), st.integers(1, 30))
def test_recurrence_identity(x, n):
    # J_{n-1} + J_{n+1} = (2n/x) J_n
    if x < 1e-3:
        return
    lhs = bessel_jn(n - 1, x) + bessel_jn(n + 1, x)
    rhs = 2 * n / x * bessel_jn(n, x)
    assert lhs == pytest.approx(rhs, abs=1e-12 * max(1.0, 2 * n / x))


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 60))
def test_neumann_normalisation(x):
    # J0 + 2 sum J_2k = 1
    s = bessel_j0(x) + 2 * sum(bessel_jn(2 * k, x) for k in range(1, 50))
    assert s == pytest.approx(1.0, abs=1e-12)


def test_periodogram_bin_matches_naive_sum_and_fft():
    rng = np.random.default_rng(3)
    x = rng.poisson(20, 257).astype(float)
    full = periodogram(x)
    for nu in (0, 1, 17, 128, 256):
        assert periodogram_bin(x, nu) == pytest.approx(periodogram_naive(x, nu), rel=1e-9)
        assert periodogram_bin(x, nu) == pytest.approx(full[nu], rel=1e-9)


def test_periodogram_dc_bin_is_square_of_sum():
    x = np.array([1.0, 2.0, 3.0])
    assert periodogram_bin(x, 0) == 36.0


def test_periodogram_pure_tone():
    n, nu = 64, 5
    x = np.cos(2 * math.pi * nu * np.arange(n) / n)
    assert periodogram_bin(x, nu) == pytest.approx((n / 2) ** 2, rel=1e-12)
    assert periodogram_bin(x, nu + 1) < 1e-20


def test_periodogram_rejects_bad_bin():
    with pytest.raises(DomainError):
        periodogram_bin(np.ones(4), 4)
    with pytest.raises(DomainError):
        periodogram_bin([], 0)


def test_fwhm_triangle():
    xs = np.linspace(-2, 2, 401)
    ys = np.maximum(0, 1 - np.abs(xs))
    assert fwhm(xs, ys) == pytest.approx(1.0, abs=1e-12)


def test_fwhm_gaussian():
    xs = np.linspace(-5, 5, 2001)
    ys = np.exp(-xs ** 2 / 2)
    assert fwhm(xs, ys) == pytest.approx(2 * math.sqrt(2 * math.log(2)), abs=1e-4)


def test_fwhm_uses_minimum_as_floor():
    xs = np.linspace(-2, 2, 401)
    ys = 3 + np.maximum(0, 1 - np.abs(xs))
    assert fwhm(xs, ys) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("ys", [np.linspace(0, 1, 10), np.ones(10),
                                np.concatenate([np.linspace(0.8, 1, 5), np.linspace(0.9, 0, 5)])])
def test_fwhm_unresolved(ys):
    with pytest.raises(PeakNotResolved):
        fwhm(np.arange(10.0), ys)


def test_loglog_fit_exact_power_law():
    x = np.geomspace(1, 100, 9)
    r = loglog_fit(x, 3 * x ** -1.5)
    assert r.slope == pytest.approx(-1.5, abs=1e-12)
    assert r.intercept == pytest.approx(math.log(3), abs=1e-12)
    assert r.slope_stderr < 1e-12


def test_loglog_fit_domain():
    with pytest.raises(DomainError):
        loglog_fit([1, 2], [1, 2])
    with pytest.raises(DomainError):
        loglog_fit([1, 2, 3], [1, 0, 2])
