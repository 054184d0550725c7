"""Closed-form statistics of the |0> population over a uniformly random AC phase.

Every function here is an average over the field's initial phase; ``omega_td``
is the AC phase advance between successive measurements of a group.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import DomainError
from .numerics import bessel_j0, bessel_jn
from .signal_model import population


@dataclass(frozen=True)
class CorrelationSettings:
    theta: float
    n_s: int
    omega_td: float

    def __post_init__(self):
        if not self.theta >= 0:
            raise DomainError(f"theta must be >= 0, got {self.theta}")
        if int(self.n_s) != self.n_s or self.n_s < 1:
            raise DomainError(f"n_s must be a positive integer, got {self.n_s}")
        if not np.all(np.isfinite(self.omega_td)):
            raise DomainError("omega_td must be finite")


def _check_theta(theta):
    if np.any(np.asarray(theta) < 0):
        raise DomainError("theta must be >= 0")


def mean_population(theta):
    _check_theta(theta)
    return 0.5 + 0.5 * bessel_j0(4.0 * np.asarray(theta, dtype=float))


def var_population(theta):
    _check_theta(theta)
    theta = np.asarray(theta, dtype=float)
    j4 = bessel_j0(4.0 * theta)
    return 0.125 + 0.125 * bessel_j0(8.0 * theta) - 0.25 * j4 * j4


def max_var(theta, n_s=None):
    """Variance at the correlated condition omega*t_d = m*pi; the same for every N_s."""
    _check_theta(theta)
    theta = np.asarray(theta, dtype=float)
    j4 = bessel_j0(4.0 * theta)
    return 0.125 * (1.0 + bessel_j0(8.0 * theta) - 2.0 * j4 * j4)


def var_two(theta, omega_td):
    """Variance of the mean of two measurements separated by omega*t_d."""
    _check_theta(theta)
    half = 0.5 * np.asarray(omega_td, dtype=float)
    j4 = bessel_j0(4.0 * theta)
    return (1.0 / 16 + bessel_j0(8.0 * theta) / 16 - 0.25 * j4 * j4
            + (bessel_j0(8.0 * theta * np.sin(half)) + bessel_j0(8.0 * theta * np.cos(half))) / 16)


def var_ns_at(theta, n_s, omega_td):
    """Variance of the mean of N_s measurements at spacing omega*t_d (array-friendly).

    Uses the lag form: the N_s*(N_s-1) cross terms collapse to N_s-1 lags
    weighted by (N_s - i).
    """
    _check_theta(theta)
    x = np.asarray(omega_td, dtype=float)
    n = int(n_s)
    j4 = bessel_j0(4.0 * theta)
    j8 = bessel_j0(8.0 * theta)
    out = (1.0 + j8 - 2.0 * j4 * j4) / (8.0 * n) - (n - 1) / (4.0 * n) * j4 * j4
    if n > 1:
        lags = np.arange(1, n)
        w = (n - lags).astype(float)
        arg = 0.5 * np.multiply.outer(x, lags)
        terms = bessel_j0(8.0 * theta * np.sin(arg)) + bessel_j0(8.0 * theta * np.cos(arg))
        out = out + (2.0 / (8.0 * n * n)) * (terms @ w)
    out = np.broadcast_to(out, x.shape)
    return float(out) if out.ndim == 0 else out.copy()


def var_ns(settings):
    """Variance of the N_s-measurement mean for a :class:`CorrelationSettings`."""
    return var_ns_at(settings.theta, settings.n_s, settings.omega_td)


def var_ns_double_sum(theta, n_s, omega_td):
    """Reference O(N_s^2) form summing every (i, j) pair."""
    x = np.asarray(omega_td, dtype=float)
    idx = np.arange(n_s)
    d = 0.5 * np.subtract.outer(idx, idx).ravel()
    arg = np.multiply.outer(x, d)
    s = bessel_j0(8.0 * theta * np.sin(arg)) + bessel_j0(8.0 * theta * np.cos(arg))
    j4 = bessel_j0(4.0 * theta)
    return s.sum(axis=-1) / (8.0 * n_s * n_s) - 0.25 * j4 * j4


def interference_factor(n_s, omega_td):
    """sin^2(N x) / (N^2 sin^2 x), equal to 1 at the removable points x = m*pi."""
    x = np.asarray(omega_td, dtype=float)
    s = np.sin(x)
    # near x = m*pi evaluate the Dirichlet ratio through its limit
    near = np.abs(s) < 1e-9
    safe = np.where(near, 1.0, s)
    ratio = np.sin(n_s * x) / (n_s * safe)
    return np.where(near, 1.0, ratio * ratio)


def var_ns_approx(settings):
    """N-slit approximation, intended for theta <~ 1."""
    return max_var(settings.theta) * interference_factor(settings.n_s, settings.omega_td)


def finite_phase_mean(theta, phi0, n_phi):
    """Average population over an N_phi-point equispaced phase comb starting at phi0."""
    if int(n_phi) != n_phi or n_phi < 1:
        raise DomainError(f"n_phi must be a positive integer, got {n_phi}")
    j = np.arange(int(n_phi))
    return float(np.mean(population(theta, phi0 + 2.0 * math.pi * j / n_phi)))


def harmonic_weight(n):
    """cos(n*pi/2) without rounding: 0 for odd n, (-1)^(n/2) for even n."""
    return 0 if n % 2 else (1 if n % 4 == 0 else -1)


def bessel_expansion_population(theta, psi, n_max):
    """Population from its Fourier-Bessel series truncated at order n_max."""
    if int(n_max) != n_max or n_max < 1:
        raise DomainError("n_max must be a positive integer")
    z = 4.0 * theta
    total = 0.5 * (1.0 + bessel_j0(z))
    for n in range(2, int(n_max) + 1, 2):
        total = total + harmonic_weight(n) * bessel_jn(n, z) * np.cos(n * np.asarray(psi))
    return total


def readout_fidelity(alpha0, alpha1, sigma0, sigma1):
    """Readout noise factor sqrt(1 + 2(s0^2 + s1^2)/(a0 - a1)^2); 1 for a perfect readout."""
    if alpha0 == alpha1:
        raise DomainError("alpha0 == alpha1: states are indistinguishable")
    if sigma0 < 0 or sigma1 < 0:
        raise DomainError("sigmas must be >= 0")
    return math.sqrt(1.0 + 2.0 * (sigma0 ** 2 + sigma1 ** 2) / (alpha0 - alpha1) ** 2)
