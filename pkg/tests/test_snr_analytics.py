import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corrsense.errors import ConsistencyError, DomainError
from corrsense.snr_analytics import (LambdaGrid, _guard, corr_noise_variance,
                                     corr_noise_variance_identical, corr_signal_expectation,
                                     corr_signal_expectation_identical, poisson_raw_moment,
                                     poisson_snr_linear, poisson_snr_squared, snr,
                                     sync_noise_variance, sync_signal_expectation)


def _pmf(lam, kmax):
    k = np.arange(kmax)
    return np.exp(k * math.log(lam) - lam - np.array([math.lgamma(i + 1) for i in k]))


def _enumerate(lams, stat, kmax=30):
    """Exact mean and variance of stat(counts) by summing over the truncated joint pmf."""
    lams = np.asarray(lams, dtype=float)
    flat = lams.ravel()
    pm = [_pmf(l, kmax) for l in flat]
    grids = np.meshgrid(*[np.arange(kmax)] * flat.size, indexing="ij")
    counts = np.stack([g.ravel() for g in grids], axis=1).astype(float)
    w = np.ones(counts.shape[0])
    for j in range(flat.size):
        w *= pm[j][counts[:, j].astype(int)]
    vals = stat(counts.reshape((-1,) + lams.shape))
    m = np.sum(w * vals)
    return m, np.sum(w * vals * vals) - m * m


def _var_est(c):
    col = c.mean(axis=1)
    return (col * col).mean(axis=1) - col.mean(axis=1) ** 2


def test_raw_moments():
    assert poisson_raw_moment(1, 4) == 15
    assert poisson_raw_moment(5, 2) == 30
    for k in range(1, 5):
        assert poisson_raw_moment(0, k) == 0
    lam = 2.7
    p = _pmf(lam, 80)
    for k in range(1, 5):
        assert poisson_raw_moment(lam, k) == pytest.approx(np.sum(p * np.arange(80.0) ** k), rel=1e-12)
    with pytest.raises(DomainError):
        poisson_raw_moment(1, 5)
    with pytest.raises(DomainError):
        poisson_raw_moment(-1, 2)


def test_grid_validation():
    with pytest.raises(DomainError):
        LambdaGrid(np.array([1.0, 2.0]))
    with pytest.raises(DomainError):
        LambdaGrid(np.array([[1.0, -2.0]]))
    g = LambdaGrid([[1, 2, 3], [4, 5, 6]])
    assert (g.n_s, g.n_phi) == (2, 3)
    with pytest.raises(ValueError):
        g.values[0, 0] = 9


def test_corr_expectation_constant_grid():
    for n_s, n_phi, lam in [(1, 5, 3.0), (10, 1000, 100.0), (4, 7, 0.2)]:
        g = LambdaGrid(np.full((n_s, n_phi), lam))
        assert corr_signal_expectation(g) == pytest.approx((n_phi - 1) / (n_phi * n_s) * lam, rel=1e-12)


def test_corr_expectation_single_phase_is_zero():
    g = LambdaGrid([[3.0], [5.0]])
    assert corr_signal_expectation(g) == pytest.approx(0.0, abs=1e-14)
    assert corr_noise_variance(g) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("lams", [[[0.7, 1.9]], [[0.5, 1.2], [2.0, 0.3]], [[1.5, 0.2, 0.9]]])
def test_corr_moments_against_exact_enumeration(lams):
    m, v = _enumerate(lams, _var_est, kmax=22 if np.size(lams) == 4 else 30)
    g = LambdaGrid(lams)
    assert corr_signal_expectation(g) == pytest.approx(m, rel=1e-10)
    assert corr_noise_variance(g) == pytest.approx(v, rel=1e-8)


def test_identical_columns_match_general_forms():
    rng = np.random.default_rng(5)
    for _ in range(50):
        n_s, n_phi = rng.integers(1, 12), rng.integers(1, 40)
        lk = rng.uniform(0, 150, n_phi)
        g = LambdaGrid(np.tile(lk, (n_s, 1)))
        assert corr_signal_expectation_identical(lk, n_s) == pytest.approx(
            corr_signal_expectation(g), rel=1e-12, abs=1e-12)
        assert corr_noise_variance_identical(lk, n_s) == pytest.approx(
            corr_noise_variance(g), rel=1e-9, abs=1e-9)


def test_noise_variance_zero_rates():
    assert corr_noise_variance(LambdaGrid(np.zeros((3, 4)))) == 0.0
    assert sync_noise_variance(np.zeros(8), 3) == 0.0


def test_nonnegativity_on_random_grids():
    rng = np.random.default_rng(17)
    for _ in range(1000):
        n_s, n_phi = rng.integers(1, 6), rng.integers(1, 12)
        lam = rng.uniform(0, 200, (n_s, n_phi))
        assert corr_noise_variance(LambdaGrid(lam)) >= 0
        flat = lam.ravel()
        assert sync_noise_variance(flat, int(rng.integers(0, flat.size))) >= 0


def test_cubic_terms_scale_as_cube():
    rng = np.random.default_rng(2)
    lk = rng.uniform(1, 10, 20)
    n_phi, c = lk.size, 3.0
    cubic = lambda l: 4 * n_phi ** 2 * np.sum(l ** 3) + 4 * l.sum() ** 3 - 8 * n_phi * l.sum() * np.sum(l * l)
    assert cubic(c * lk) == pytest.approx(c ** 3 * cubic(lk), rel=1e-12)


def test_sync_expectation_examples():
    n, lam = 64, 7.0
    x = np.full(n, lam)
    assert sync_signal_expectation(x, 5) == pytest.approx(n * lam, rel=1e-12)
    assert sync_signal_expectation(x, 0) == pytest.approx((n * lam) ** 2 + n * lam, rel=1e-12)
    n, lam = 10_000, 50.0
    k = np.arange(n)
    x = lam * (1 + np.cos(2 * math.pi * 20 * k / n))
    assert sync_signal_expectation(x, 20) == pytest.approx((lam * n / 2) ** 2 + x.sum(), rel=1e-10)


def test_sync_variance_constant_rate_closed_form():
    # constant lambda, nu != 0 and 2 nu != 0 mod N: only L + L^2 survive
    n, lam = 50, 3.0
    assert sync_noise_variance(np.full(n, lam), 7) == pytest.approx(n * lam + (n * lam) ** 2, rel=1e-12)
    # 2 nu = 0 mod N: |C2|^2 = L^2 adds on
    assert sync_noise_variance(np.full(n, lam), 25) == pytest.approx(n * lam + 2 * (n * lam) ** 2,
                                                                     rel=1e-12)


@pytest.mark.parametrize("lams,nu", [([0.8, 1.7, 0.4], 1), ([2.0, 0.3, 1.1, 0.6], 1),
                                     ([2.0, 0.3, 1.1, 0.6], 2), ([1.4, 0.9], 1)])
def test_sync_moments_against_exact_enumeration(lams, nu):
    n = len(lams)
    e = np.exp(-2j * math.pi * nu * np.arange(n) / n)
    stat = lambda c: np.abs(c @ e) ** 2
    m, v = _enumerate(lams, stat, kmax=25 if n == 4 else 35)
    assert sync_signal_expectation(lams, nu) == pytest.approx(m, rel=1e-10)
    assert sync_noise_variance(lams, nu) == pytest.approx(v, rel=1e-8)


def test_sync_rejects_bad_bin():
    with pytest.raises(DomainError):
        sync_signal_expectation([1.0, 2.0], 2)
    with pytest.raises(DomainError):
        sync_noise_variance([1.0, -2.0], 1)


def test_snr_examples():
    assert snr(10, 2) == 5
    with pytest.raises(DomainError):
        snr(1, 0)
    assert poisson_snr_linear(100) == 10
    assert poisson_snr_squared(100) == pytest.approx(100 * 101 / math.sqrt(100 * (40000 + 600 + 1)))
    # the closed form evaluates to 5.0125 at lambda = 100
    assert poisson_snr_squared(100) == pytest.approx(5.012484106833466, abs=1e-12)
    # and matches the brute-force fourth central moment of a Poisson(100)
    p = np.exp(np.arange(400) * math.log(100) - 100 - np.array([math.lgamma(k + 1) for k in range(400)]))
    x2 = np.arange(400.0) ** 2
    m = np.sum(p * x2)
    assert poisson_snr_squared(100) == pytest.approx(m / math.sqrt(np.sum(p * x2 * x2) - m * m), rel=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e3, 1e8))
def test_squaring_penalty_tends_to_half(lam):
    r = poisson_snr_squared(lam) / poisson_snr_linear(lam)
    # (lam+1)/sqrt(4 lam^2 + 6 lam + 1) = (1 + 1/(4 lam) + ...)/2
    assert 0.5 * (1 - 1e-12) <= r <= 0.5 * (1 + 1 / lam)


def test_guard():
    assert _guard(-1e-12, 1.0, "x") == 0.0
    assert _guard(2.0, 1.0, "x") == 2.0
    with pytest.raises(ConsistencyError):
        _guard(-1e-3, 1.0, "x")
