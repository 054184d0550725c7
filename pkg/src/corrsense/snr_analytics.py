"""Exact Poisson moment algebra for the two readout estimators.

Correlation readout uses the sample variance of column means of an
``N_s x N_phi`` count matrix; synchronized readout uses one periodogram bin of
the flattened count stream.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ConsistencyError, DomainError


@dataclass(frozen=True)
class LambdaGrid:
    """Poisson rates, shape ``(n_s, n_phi)``: row i is the delay index, column k the phase."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or min(v.shape) < 1:
            raise DomainError("lambda grid must be a non-empty 2-D array")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise DomainError("rates must be finite and >= 0")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_s(self):
        return self.values.shape[0]

    @property
    def n_phi(self):
        return self.values.shape[1]


def poisson_raw_moment(lam, k):
    """E[x^k] for x ~ Poisson(lam), k = 1..4."""
    if lam < 0:
        raise DomainError("rate must be >= 0")
    if k == 1:
        return lam
    if k == 2:
        return lam * (lam + 1)
    if k == 3:
        return lam * (lam * lam + 3 * lam + 1)
    if k == 4:
        return lam * (lam ** 3 + 6 * lam * lam + 7 * lam + 1)
    raise DomainError(f"moment order must be 1..4, got {k}")


def _guard(value, scale, what):
    if value < -1e-9 * max(scale, 1e-300):
        raise ConsistencyError(f"{what} came out negative ({value:.6g})")
    return max(value, 0.0)


def corr_signal_expectation(grid):
    """E of the column-mean variance estimator for a general rate grid."""
    lam = grid.values
    n_s, n_phi = lam.shape
    col = lam.sum(axis=0)
    total = col.sum()
    return ((n_phi - 1) / (n_phi ** 2 * n_s ** 2) * total
            + np.sum(col * col) / (n_phi * n_s ** 2)
            - total * total / (n_phi ** 2 * n_s ** 2))


def corr_signal_expectation_identical(lambda_k, n_s):
    """Same expectation when every row of a column shares the rate lambda_k."""
    lk = np.asarray(lambda_k, dtype=float)
    n_phi = lk.size
    mean = lk.mean()
    return (n_phi - 1) / (n_phi ** 2 * n_s) * lk.sum() + np.mean(lk * lk) - mean * mean


def corr_noise_variance(grid):
    """Variance of the column-mean variance estimator (general grid).

    Only the column totals m_k = sum_i lambda_ik enter, since the column sums of
    independent Poisson counts are themselves Poisson.
    """
    lam = grid.values
    n_s, n_phi = lam.shape
    m = lam.sum(axis=0)
    M = m.sum()
    s2 = np.sum(m * m)
    s3 = np.sum(m ** 3)
    num = ((n_phi - 1) ** 2 * M
           + (6 * n_phi ** 2 - 8 * n_phi) * s2
           + 4 * n_phi ** 2 * s3
           + (6 - 4 * n_phi) * M * M
           - 8 * n_phi * M * s2
           + 4 * M ** 3)
    value = num / (n_phi ** 4 * n_s ** 4)
    scale = (4 * n_phi ** 2 * s3 + 4 * M ** 3 + n_phi ** 2 * M) / (n_phi ** 4 * n_s ** 4)
    return _guard(value, scale, "variance of the variance estimator")


def corr_noise_variance_identical(lambda_k, n_s):
    """Correlated-condition form: all N_s rows of column k share lambda_k."""
    lk = np.asarray(lambda_k, dtype=float)
    n_phi = lk.size
    L1 = lk.sum()
    L2 = np.sum(lk * lk)
    L3 = np.sum(lk ** 3)
    p4 = n_phi ** 4
    value = ((n_phi - 1) ** 2 / (p4 * n_s ** 3) * L1
             + (6 * n_phi ** 2 - 8 * n_phi) / (p4 * n_s ** 2) * L2
             + 4 * n_phi ** 2 / (p4 * n_s) * L3
             + (6 - 4 * n_phi) / (p4 * n_s ** 2) * L1 * L1
             - 8 * n_phi / (p4 * n_s) * L2 * L1
             + 4 / (p4 * n_s) * L1 ** 3)
    scale = (4 * n_phi ** 2 * L3 + 4 * L1 ** 3) / (p4 * n_s) + L1 / (n_phi ** 2 * n_s ** 3)
    return _guard(value, scale, "variance of the variance estimator")


def _dft(lam, nu, mult=1):
    n = lam.size
    k = (mult * int(nu) * np.arange(n, dtype=np.int64)) % n
    return np.dot(lam, np.exp(-2j * np.pi * k / n))


def _check_bin(lam, nu):
    lam = np.asarray(lam, dtype=float).ravel()
    if lam.size == 0:
        raise DomainError("empty rate sequence")
    if int(nu) != nu or not 0 <= nu < lam.size:
        raise DomainError(f"bin {nu} outside [0, {lam.size})")
    if np.any(lam < 0):
        raise DomainError("rates must be >= 0")
    return lam


def sync_signal_expectation(lambdas, nu):
    """E|y(nu)|^2: coherent power plus the shot-noise floor sum(lambda)."""
    lam = _check_bin(lambdas, nu)
    c = _dft(lam, nu)
    return float(abs(c) ** 2 + lam.sum())


def sync_noise_variance(lambdas, nu):
    """Var|y(nu)|^2 for independent Poisson samples.

    Six terms: L + 4|C1|^2 + L^2 + |C2|^2 + 2 Re(conj(C2) C1^2) + 2 L |C1|^2,
    with L = sum(lambda) and C_m the rate DFT at bin m*nu. The fifth term is
    complex term-by-term; its real part is the variance contribution.
    """
    lam = _check_bin(lambdas, nu)
    L = lam.sum()
    c1 = _dft(lam, nu)
    c2 = _dft(lam, nu, 2)
    p1 = abs(c1) ** 2
    value = (L + 4 * p1 + L * L + abs(c2) ** 2
             + 2 * (np.conj(c2) * c1 * c1).real + 2 * L * p1)
    scale = L + L * L + 2 * L * p1 + 4 * p1
    return _guard(float(value), scale, "periodogram variance")


def snr(signal_mean, noise_std):
    if not noise_std > 0:
        raise DomainError("noise std must be > 0")
    return signal_mean / noise_std


def poisson_snr_linear(lam):
    """SNR of a single Poisson count: sqrt(lambda)."""
    return math.sqrt(lam)


def poisson_snr_squared(lam):
    """SNR of a squared Poisson count, lambda(lambda+1)/sqrt(lambda(4 lambda^2 + 6 lambda + 1))."""
    if not lam > 0:
        raise DomainError("rate must be > 0")
    # E[x^4] - E[x^2]^2 reduced by hand; subtracting the raw moments loses digits at large lambda
    return lam * (lam + 1) / math.sqrt(lam * (4 * lam * lam + 6 * lam + 1))
