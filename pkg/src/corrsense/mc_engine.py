"""Seeded Monte-Carlo simulation of correlation and synchronized readout campaigns.

Every trial draws from its own Philox stream whose key comes from the master
seed and a string tag and whose counter's third word is the trial index, so a
trial's counts depend only on (master_seed, tag, trial) and never on how trials
are split across workers.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
import enum
import math
import zlib

import numpy as np

from .errors import DomainError
from .numerics import periodogram, periodogram_bin
from .signal_model import effective_theta, expected_photons, population
from .snr_analytics import (LambdaGrid, corr_noise_variance, corr_signal_expectation,
                            sync_noise_variance, sync_signal_expectation)

TWO_PI = 2.0 * math.pi


class ScheduleMode(enum.Enum):
    # i (delay index) advances fastest in acquisition order
    DELAY_MAJOR = "delay_major"
    # k (phase index) advances fastest in acquisition order
    PHASE_MAJOR = "phase_major"


@dataclass(frozen=True)
class ProtocolSchedule:
    """Measurement (i, k) starts at ``i*t_d + k*t_phi``; the block repeats n_r times."""

    n_s: int
    n_phi: int
    t_d: float
    t_phi: float
    t_dead: float = 0.0
    n_r: int = 1
    mode: ScheduleMode = ScheduleMode.DELAY_MAJOR

    def __post_init__(self):
        object.__setattr__(self, "mode", ScheduleMode(self.mode))
        for name in ("n_s", "n_phi", "n_r"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise DomainError(f"{name} must be a positive integer, got {v}")
            object.__setattr__(self, name, int(v))
        for name in ("t_d", "t_phi", "t_dead"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise DomainError(f"{name} must be >= 0, got {v}")

    def start_times(self):
        i = np.arange(self.n_s)[:, None]
        k = np.arange(self.n_phi)[None, :]
        return i * self.t_d + k * self.t_phi

    def total_duration(self, tau):
        """Wall time of the whole campaign for a sequence of length tau."""
        block = (self.n_s - 1) * self.t_d + (self.n_phi - 1) * self.t_phi + tau + self.t_dead
        return self.n_r * block


@dataclass(frozen=True)
class CountsMatrix:
    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or np.any(c < 0):
            raise DomainError("counts must be a non-negative 2-D matrix")
        object.__setattr__(self, "counts", c)

    @property
    def shape(self):
        return self.counts.shape

    def flatten(self, mode):
        return flatten_acquisition(self.counts, mode)

    def normalized(self, det):
        """Counts expressed as populations, counts / (n_nv * eta)."""
        return self.counts / det.lambda_max


@dataclass(frozen=True)
class RunConfig:
    master_seed: int
    trials: int
    workers: int = 1

    def __post_init__(self):
        if int(self.master_seed) != self.master_seed or not 0 <= self.master_seed < 2 ** 64:
            raise DomainError("master_seed must be an unsigned 64-bit integer")
        if int(self.trials) != self.trials or self.trials < 1:
            raise DomainError("trials must be a positive integer")
        if int(self.workers) != self.workers or self.workers < 1:
            raise DomainError("workers must be a positive integer")


class Estimator(enum.Enum):
    VARIANCE = "variance"            # sigma_hat squared
    SIGMA_HAT = "sigma_hat"
    PERIODOGRAM = "periodogram"      # |y(nu)|^2
    PERIODOGRAM_ABS = "periodogram_abs"  # |y(nu)|
    PERIODOGRAM_MAX = "periodogram_max"  # max over bins 1..N/2 of |y|^2

    @property
    def is_correlation(self):
        return self in (Estimator.VARIANCE, Estimator.SIGMA_HAT)


def trial_rng(master_seed, tag, trial):
    """Independent generator for one trial: Philox keyed by (seed, tag), counter by trial."""
    ss = np.random.SeedSequence([int(master_seed), zlib.crc32(tag.encode())])
    k0, k1 = (int(w) for w in ss.generate_state(2, np.uint64))
    key = k0 | (k1 << 64)
    counter = int(trial) << 128
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def build_lambda_grid(schedule, seq, field, det, consts, convention="quarter"):
    """Rate matrix with lambda_ik = P(theta, omega*tau/2 + phi0 + i*omega*t_d + k*omega*t_phi) * n_nv * eta."""
    theta = effective_theta(seq, field, consts, convention)
    w = field.omega
    i = np.arange(schedule.n_s)[:, None]
    k = np.arange(schedule.n_phi)[None, :]
    # reduce each increment mod 2*pi first so long delays do not lose phase digits
    step_d = math.fmod(w * schedule.t_d, TWO_PI)
    step_phi = math.fmod(w * schedule.t_phi, TWO_PI)
    psi = 0.5 * w * seq.tau + field.phi0 + i * step_d + k * step_phi
    return LambdaGrid(expected_photons(population(theta, psi), det))


def sample_counts(grid, rng):
    """One Poisson draw per cell; zero-rate cells give exactly 0."""
    lam = grid.values if isinstance(grid, LambdaGrid) else np.asarray(grid)
    return CountsMatrix(rng.poisson(lam))


def _counts(counts):
    return counts.counts if isinstance(counts, CountsMatrix) else np.asarray(counts)


def estimator_variance(counts):
    """Population variance (divide by N_phi) of the column means over phases."""
    c = _counts(counts).astype(float)
    if c.shape[1] < 2:
        raise DomainError("need at least two phases")
    col = c.mean(axis=0)
    return float(np.mean(col * col) - np.mean(col) ** 2)


def estimator_sigma_hat(counts):
    return math.sqrt(max(estimator_variance(counts), 0.0))


def flatten_acquisition(counts, mode):
    """Counts in the order they were acquired."""
    c = _counts(counts)
    if ScheduleMode(mode) is ScheduleMode.DELAY_MAJOR:
        return c.T.ravel()
    return c.ravel()


def estimator_periodogram(flat, nu):
    return periodogram_bin(flat, nu)


def estimator_periodogram_max(flat):
    p = periodogram(flat)
    return float(p[1:len(p) // 2 + 1].max())


def first_harmonic_bin(schedule, omega):
    """Periodogram bin of the population's fundamental for a uniform acquisition stream.

    The population repeats every half AC period, so its fundamental advances by
    twice the per-sample AC phase step.
    """
    n = schedule.n_s * schedule.n_phi
    t_step = schedule.t_d if schedule.mode is ScheduleMode.DELAY_MAJOR else schedule.t_phi
    step = math.remainder(omega * t_step, TWO_PI)
    return int(round(n * 2.0 * step / TWO_PI)) % n


def uncorrelated_schedule(schedule, omega):
    """Same schedule with t_d moved to the first interference zero past the nearest correlated delay."""
    m = round(omega * schedule.t_d / math.pi)
    return replace(schedule, t_d=(m * math.pi + math.pi / schedule.n_s) / omega)


def correlation_baseline(schedule, seq, field, det, consts, convention="quarter"):
    """Expected variance estimator with no correlation signal.

    For N_s >= 2 this is the expectation at the first interference zero; a
    single-measurement group has no such condition, so the shot-noise floor
    alone is used.
    """
    if schedule.n_s == 1:
        g = build_lambda_grid(schedule, seq, field, det, consts, convention).values
        n_phi = schedule.n_phi
        return (n_phi - 1) / n_phi ** 2 * g.sum()
    unc = uncorrelated_schedule(schedule, field.omega)
    return corr_signal_expectation(build_lambda_grid(unc, seq, field, det, consts, convention))


def _evaluate(estimators, counts, mode, nu):
    out = []
    flat = None
    for est in estimators:
        if est is Estimator.VARIANCE:
            out.append(estimator_variance(counts))
        elif est is Estimator.SIGMA_HAT:
            out.append(estimator_sigma_hat(counts))
        else:
            if flat is None:
                flat = flatten_acquisition(counts, mode).astype(float)
            if est is Estimator.PERIODOGRAM:
                out.append(periodogram_bin(flat, nu))
            elif est is Estimator.PERIODOGRAM_ABS:
                out.append(math.sqrt(periodogram_bin(flat, nu)))
            else:
                out.append(estimator_periodogram_max(flat))
    return out


def _run_chunk(args):
    lam, seed, tag, start, stop, estimators, mode, nu = args
    rows = []
    for t in range(start, stop):
        counts = trial_rng(seed, tag, t).poisson(lam)
        rows.append(_evaluate(estimators, counts, mode, nu))
    return rows


def simulate_trials(grid, cfg, estimators, mode=ScheduleMode.DELAY_MAJOR, nu=None,
                    tag="campaign"):
    """Per-trial estimator values, shape (trials, len(estimators)), in trial order."""
    estimators = tuple(Estimator(e) for e in estimators)
    lam = grid.values if isinstance(grid, LambdaGrid) else np.asarray(grid, dtype=float)
    if nu is None and any(e in (Estimator.PERIODOGRAM, Estimator.PERIODOGRAM_ABS) for e in estimators):
        raise DomainError("periodogram estimator needs a bin nu")
    n = cfg.trials
    nchunks = min(n, max(1, cfg.workers) * 4)
    bounds = np.linspace(0, n, nchunks + 1).astype(int)
    jobs = [(lam, cfg.master_seed, tag, int(a), int(b), estimators, ScheduleMode(mode), nu)
            for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    return np.array([row for part in parts for row in part], dtype=float).reshape(n, len(estimators))


@dataclass
class CampaignResult:
    estimator: Estimator
    mean: float
    std: float
    snr: float
    baseline: float
    nu: int = None
    values: np.ndarray = None


def summarize(values, baseline=0.0):
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    std = float(values.std(ddof=1))
    snr = (mean - baseline) / std if std > 0 else math.nan
    return mean, std, snr


def run_campaign(schedule, seq, field, det, consts, cfg, estimator, nu=None,
                 subtract_baseline=True, keep_values=False, convention="quarter",
                 tag="campaign"):
    """Simulate cfg.trials campaigns and reduce them to mean, std and SNR.

    Correlation estimators have the uncorrelated expectation subtracted from
    the mean when ``subtract_baseline`` is set (so B = 0 gives SNR ~ 0);
    periodogram estimators are always reported raw.
    """
    if cfg.trials < 2:
        raise DomainError("need at least two trials for a spread")
    est = Estimator(estimator)
    grid = build_lambda_grid(schedule, seq, field, det, consts, convention)
    if est in (Estimator.PERIODOGRAM, Estimator.PERIODOGRAM_ABS) and nu is None:
        nu = first_harmonic_bin(schedule, field.omega)
    values = simulate_trials(grid, cfg, [est], schedule.mode, nu, tag)[:, 0]
    baseline = 0.0
    if est.is_correlation and subtract_baseline:
        baseline = correlation_baseline(schedule, seq, field, det, consts, convention)
        if est is Estimator.SIGMA_HAT:
            baseline = math.sqrt(baseline)
    mean, std, snr = summarize(values, baseline)
    return CampaignResult(est, mean, std, snr, baseline, nu, values if keep_values else None)


def analytic_correlation_snr(schedule, seq, field, det, consts, subtract_baseline=True,
                             convention="quarter"):
    """(E[corr] - E[uncorr]) / sqrt(Var[corr]) for the variance estimator."""
    grid = build_lambda_grid(schedule, seq, field, det, consts, convention)
    signal = corr_signal_expectation(grid)
    if subtract_baseline:
        signal -= correlation_baseline(schedule, seq, field, det, consts, convention)
    noise = math.sqrt(corr_noise_variance(grid))
    return signal / noise if noise > 0 else math.nan


def analytic_sync_snr(schedule, seq, field, det, consts, nu=None, convention="quarter"):
    grid = build_lambda_grid(schedule, seq, field, det, consts, convention)
    if nu is None:
        nu = first_harmonic_bin(schedule, field.omega)
    flat = flatten_acquisition(grid.values, schedule.mode)
    return sync_signal_expectation(flat, nu) / math.sqrt(sync_noise_variance(flat, nu))


def repetition_spread(sigma_hats, n_r=None):
    """Sample standard deviation (N_r - 1 denominator) of repeated sigma_hat values."""
    v = np.asarray(sigma_hats, dtype=float)
    if n_r is None:
        n_r = v.size
    if n_r < 2 or v.size != n_r:
        raise DomainError("need n_r >= 2 values matching n_r")
    return float(math.sqrt(np.sum((v - v.mean()) ** 2) / (n_r - 1)))
