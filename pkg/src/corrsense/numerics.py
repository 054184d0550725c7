"""Numerical kernels: Bessel functions of the first kind, single periodogram
bins, half-maximum widths and log-log regression."""

from dataclasses import dataclass
import math

import numpy as np

from .errors import DomainError, PeakNotResolved

# |x| beyond which J0 uses the Hankel expansion; below SERIES_MAX the power series
SERIES_MAX = 8.0
HANKEL_MIN = 25.0
X_MAX = 2000.0
N_MAX = 100


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("Bessel argument must be finite")
    if np.any(np.abs(arr) > X_MAX):
        raise DomainError(f"|x| > {X_MAX} not supported")
    return arr


def _series(n, ax):
    """Ascending series for J_n, 0 <= ax <= SERIES_MAX."""
    q = -0.25 * ax * ax
    term = np.ones_like(ax)
    total = np.ones_like(ax)
    for k in range(1, 60):
        term = term * q / (k * (k + n))
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    if n == 0:
        return total
    with np.errstate(divide="ignore"):
        logpre = n * np.log(0.5 * ax) - math.lgamma(n + 1)
    return total * np.exp(logpre)


def _miller(n, ax):
    """Downward recurrence normalised by J0 + 2*sum J_2k = 1, ax > 0."""
    xmax = float(np.max(ax))
    start = int(max(n + 20, xmax + 15.0 * xmax ** (1.0 / 3.0) + 20))
    start += start % 2
    f_next = np.zeros_like(ax)
    f = np.full_like(ax, 1e-300)
    norm = np.zeros_like(ax)
    keep = np.zeros_like(ax)
    for k in range(start, 0, -1):
        # f holds f_k; step down to f_{k-1}
        f_prev = (2.0 * k / ax) * f - f_next
        f_next, f = f, f_prev
        if k - 1 == n:
            keep = f.copy()
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm = norm + 2.0 * f
        big = np.abs(f) > 1e250
        if np.any(big):
            s = np.where(big, 1e-250, 1.0)
            f, f_next, norm, keep = f * s, f_next * s, norm * s, keep * s
    norm = norm + f
    return keep / norm


def _hankel_j0(ax):
    """Asymptotic expansion, accurate to roundoff for ax >= HANKEL_MIN."""
    p = np.ones_like(ax)
    q = np.zeros_like(ax)
    a = 1.0
    inv = 1.0 / ax
    powx = np.ones_like(ax)
    for k in range(1, 60):
        a *= -((2 * k - 1) ** 2) / (8.0 * k)
        powx = powx * inv
        term = a * powx
        # P takes even k, Q odd k, each with alternating sign over its own index
        if k % 4 == 1:
            q = q + term
        elif k % 4 == 2:
            p = p - term
        elif k % 4 == 3:
            q = q - term
        else:
            p = p + term
        if np.all(np.abs(term) < 1e-18):
            break
    chi = ax - 0.25 * math.pi
    return np.sqrt(2.0 / (math.pi * ax)) * (p * np.cos(chi) - q * np.sin(chi))


def bessel_j0(x):
    """Zeroth-order Bessel function J0, scalar or array input."""
    arr = _as_array(x)
    ax = np.abs(np.atleast_1d(arr))
    out = np.empty_like(ax)
    lo = ax <= SERIES_MAX
    hi = ax >= HANKEL_MIN
    mid = ~(lo | hi)
    if lo.any():
        out[lo] = _series(0, ax[lo])
    if mid.any():
        out[mid] = _miller(0, ax[mid])
    if hi.any():
        out[hi] = _hankel_j0(ax[hi])
    return out.reshape(arr.shape)[()] if arr.ndim else float(out[0])


def bessel_jn(n, x):
    """Bessel function of the first kind J_n for integer 0 <= n <= 100."""
    if isinstance(n, bool) or int(n) != n or not 0 <= n <= N_MAX:
        raise DomainError(f"order must be an integer in [0, {N_MAX}], got {n!r}")
    n = int(n)
    if n == 0:
        return bessel_j0(x)
    arr = _as_array(x)
    flat = np.atleast_1d(arr)
    ax = np.abs(flat)
    out = np.zeros_like(ax)
    lo = ax <= SERIES_MAX
    if lo.any():
        out[lo] = _series(n, ax[lo])
    if (~lo).any():
        out[~lo] = _miller(n, ax[~lo])
    if n % 2:
        out = np.where(flat < 0, -out, out)
    return out.reshape(arr.shape)[()] if arr.ndim else float(out[0])


def periodogram_bin(samples, nu):
    """Raw periodogram ``|sum_k s_k exp(-2 pi i nu k / N)|**2`` at one bin."""
    s = np.asarray(samples, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise DomainError("periodogram needs a non-empty 1-D sequence")
    n = s.size
    if int(nu) != nu or not 0 <= nu < n:
        raise DomainError(f"bin {nu} outside [0, {n})")
    # reduce nu*k mod N before scaling so the phase stays exact for long records
    k = (int(nu) * np.arange(n, dtype=np.int64)) % n
    y = np.dot(s, np.exp(-2j * np.pi * k / n))
    return float(y.real * y.real + y.imag * y.imag)


def periodogram(samples):
    """All bins of the raw periodogram via FFT (same normalisation as periodogram_bin)."""
    s = np.asarray(samples, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise DomainError("periodogram needs a non-empty 1-D sequence")
    y = np.fft.fft(s)
    return y.real ** 2 + y.imag ** 2


def fwhm(xs, ys):
    """Full width at half maximum of the global peak.

    Half maximum is measured from the ``min(ys)`` floor. Each crossing is
    linearly interpolated between the bracketing samples nearest the peak.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1 or xs.size < 3:
        raise DomainError("xs and ys must be 1-D of equal length >= 3")
    if np.any(np.diff(xs) <= 0):
        raise DomainError("xs must be strictly ascending")
    p = int(np.argmax(ys))
    top, floor = ys[p], ys.min()
    if p == 0 or p == ys.size - 1 or top == floor:
        raise PeakNotResolved()
    half = floor + 0.5 * (top - floor)

    below = np.nonzero(ys[:p] <= half)[0]
    if below.size == 0:
        raise PeakNotResolved()
    j = below[-1]
    left = xs[j] + (half - ys[j]) * (xs[j + 1] - xs[j]) / (ys[j + 1] - ys[j])

    below = np.nonzero(ys[p + 1:] <= half)[0]
    if below.size == 0:
        raise PeakNotResolved()
    j = p + 1 + below[0]
    right = xs[j - 1] + (half - ys[j - 1]) * (xs[j] - xs[j - 1]) / (ys[j] - ys[j - 1])
    return float(right - left)


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    slope_stderr: float


def loglog_fit(xs, ys):
    """Ordinary least squares of ln(y) on ln(x)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("xs and ys must be 1-D of equal length")
    if x.size < 3:
        raise DomainError("log-log fit needs at least 3 points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("log-log fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    mx, my = lx.mean(), ly.mean()
    sxx = np.sum((lx - mx) ** 2)
    if sxx == 0:
        raise DomainError("xs must not all be equal")
    slope = np.sum((lx - mx) * (ly - my)) / sxx
    intercept = my - slope * mx
    resid = ly - (intercept + slope * lx)
    stderr = math.sqrt(np.sum(resid ** 2) / (x.size - 2) / sxx)
    return FitResult(float(slope), float(intercept), stderr)
