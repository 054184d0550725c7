"""Studies built on the analytic and Monte-Carlo layers: delay traces,
linewidth and resolution scaling, harmonic structure and SNR robustness."""

from dataclasses import dataclass, field, replace
import math

import numpy as np

from . import mc_engine as mc
from .analytic_stats import harmonic_weight, var_ns_at
from .errors import DomainError, PeakNotResolved
from .numerics import bessel_jn, fwhm, loglog_fit
from .signal_model import AcField, DetectionModel, PhysicsConstants, PulseSequence, effective_theta


@dataclass(frozen=True)
class ReferenceSetup:
    """Robustness-study operating point: 500 kHz field, one-period spin echo,
    N_s = 10 delays by N_phi = 1000 phases, lambda_max = 100 photons."""

    omega: float = 2 * math.pi * 5e5
    n_s: int = 10
    n_phi: int = 1000
    n_nv: float = 1e6
    eta: float = 1e-4

    @property
    def tau(self):
        return 2 * math.pi / self.omega

    @property
    def t_phi(self):
        # one AC period plus a 1/N_phi phase step
        return self.tau * (1.0 + 1.0 / self.n_phi)

    def schedule(self):
        return mc.ProtocolSchedule(self.n_s, self.n_phi, t_d=self.n_phi * self.t_phi,
                                   t_phi=self.t_phi, mode=mc.ScheduleMode.PHASE_MAJOR)

    def sequence(self):
        return PulseSequence.spin_echo(self.tau)

    def detection(self):
        return DetectionModel(self.n_nv, self.eta)

    def constants(self):
        return PhysicsConstants()


@dataclass
class TraceResult:
    t_d: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)
    mc_mean: np.ndarray = None
    mc_std: np.ndarray = None

    def __post_init__(self):
        if len(self.t_d) != len(self.values):
            raise ValueError("t_d and values differ in length")


def _trace_values(theta, n_s, omega_td, use_sqrt):
    v = var_ns_at(theta, n_s, omega_td)
    return np.sqrt(np.maximum(v, 0.0)) if use_sqrt else v


def correlation_trace(theta, n_s, omega, td_range, resolution, use_sqrt=False):
    """Analytic correlation signal on an evenly spaced t_d grid."""
    if resolution < 2:
        raise DomainError("resolution must be at least 2 points")
    t = np.linspace(td_range[0], td_range[1], int(resolution))
    vals = _trace_values(theta, n_s, omega * t, use_sqrt)
    meta = {"theta": theta, "n_s": n_s, "omega": omega, "use_sqrt": use_sqrt}
    return TraceResult(t, vals, meta)


def local_minima(values):
    """Indices of strict interior local minima."""
    v = np.asarray(values)
    return np.nonzero((v[1:-1] < v[:-2]) & (v[1:-1] < v[2:]))[0] + 1


def local_maxima(values):
    v = np.asarray(values)
    return np.nonzero((v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:]))[0] + 1


def peak_width(theta, n_s, omega, t_center, use_sqrt=False, points=2001):
    """FWHM (seconds) of the correlated peak nearest t_center.

    The half-maximum floor is the minimum over the half period on either side
    of the peak; a second, finer grid around the first estimate sharpens the
    interpolated crossings.
    """
    m = max(1, round(omega * t_center / math.pi))
    xp = m * math.pi
    xs = xp + np.linspace(-0.5 * math.pi, 0.5 * math.pi, points)
    w0 = fwhm(xs, _trace_values(theta, n_s, xs, use_sqrt))
    fine = xp + np.linspace(-2.0 * w0, 2.0 * w0, points)
    xa = np.union1d(xs, fine)
    return fwhm(xa, _trace_values(theta, n_s, xa, use_sqrt)) / omega, xp / omega


@dataclass
class ScalingResult:
    x: np.ndarray
    y: np.ndarray
    resolved: np.ndarray
    fit: object
    extra: dict = field(default_factory=dict)


def linewidth_vs_field(n_s, omega, seq, b_values, consts, t_center=100e-6, use_sqrt=False,
                       convention="quarter"):
    """FWHM of the correlation peak near t_center for each field amplitude, plus a log-log fit."""
    b = np.asarray(b_values, dtype=float)
    if np.any(b <= 0) or np.any(np.diff(b) <= 0):
        raise DomainError("field amplitudes must be positive and ascending")
    widths = np.full(b.size, np.nan)
    ok = np.zeros(b.size, dtype=bool)
    thetas = np.empty(b.size)
    for j, amp in enumerate(b):
        thetas[j] = effective_theta(seq, AcField(omega, amp), consts, convention)
        try:
            widths[j], _ = peak_width(thetas[j], n_s, omega, t_center, use_sqrt)
            ok[j] = True
        except PeakNotResolved:
            pass
    fit = loglog_fit(b[ok], widths[ok]) if ok.sum() >= 3 else None
    return ScalingResult(b, widths, ok, fit, {"theta": thetas})


def resolution_vs_time(theta, n_s_values, t_d_values, omega, use_sqrt=True):
    """Frequency resolution delta_omega = (FWHM / t_d) * omega against total time N_s * t_d.

    Each requested t_d is snapped to the nearest correlated delay m*pi/omega.
    N_s = 1 has no interference peak and is reported unresolved.
    """
    rows = []
    for n in n_s_values:
        for td in t_d_values:
            try:
                width, t_peak = peak_width(theta, n, omega, td, use_sqrt)
                rows.append((n, t_peak, width / t_peak * omega, True))
            except PeakNotResolved:
                t_peak = max(1, round(omega * td / math.pi)) * math.pi / omega
                rows.append((n, t_peak, math.nan, False))
    n_arr = np.array([r[0] for r in rows])
    t_arr = np.array([r[1] for r in rows])
    dw = np.array([r[2] for r in rows])
    ok = np.array([r[3] for r in rows])
    total = n_arr * t_arr
    fit = loglog_fit(total[ok], dw[ok]) if ok.sum() >= 3 else None
    return ScalingResult(total, dw, ok, fit, {"n_s": n_arr, "t_d": t_arr})


def harmonic_amplitudes(theta, n_max):
    """Fourier coefficients of the population in the AC phase psi.

    Entry n is the cos(n psi) coefficient; entry 0 is the mean. Odd entries are
    exactly zero, even ones are (-1)^(n/2) J_n(4 theta).
    """
    if int(n_max) != n_max or n_max < 2:
        raise DomainError("n_max must be an integer >= 2")
    out = np.zeros(int(n_max) + 1)
    z = 4.0 * theta
    out[0] = 0.5 * (1.0 + bessel_jn(0, z))
    for n in range(2, int(n_max) + 1, 2):
        out[n] = harmonic_weight(n) * bessel_jn(n, z)
    return out


def bessel_zeros(n, count, step=0.05):
    """First ``count`` positive zeros of J_n by bracketing and bisection."""
    zeros = []
    a = step
    fa = bessel_jn(n, a)
    while len(zeros) < count:
        b = a + step
        fb = bessel_jn(n, b)
        if fa == 0:
            zeros.append(a)
        elif fa * fb < 0:
            lo, hi, flo = a, b, fa
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                fm = bessel_jn(n, mid)
                if fm == 0 or hi - lo < 1e-15 * hi:
                    break
                if (fm < 0) == (flo < 0):
                    lo, flo = mid, fm
                else:
                    hi = mid
            zeros.append(0.5 * (lo + hi))
        a, fa = b, fb
    return np.array(zeros)


def harmonic_dip_fields(omega, seq, consts, count=5, convention="quarter"):
    """Field amplitudes at which the first observed harmonic J_2(4 theta) vanishes."""
    per_tesla = effective_theta(seq, AcField(omega, 1.0), consts, convention)
    return bessel_zeros(2, count) / (4.0 * per_tesla)


def periodogram_dip_fields(schedule, seq, det, consts, omega, b_grid, convention="quarter"):
    """Fields where the noise-free first-harmonic periodogram amplitude has a local minimum."""
    nu = mc.first_harmonic_bin(schedule, omega)
    amp = np.empty(len(b_grid))
    for j, b in enumerate(b_grid):
        grid = mc.build_lambda_grid(schedule, seq, AcField(omega, b), det, consts, convention)
        flat = mc.flatten_acquisition(grid.values, schedule.mode)
        k = (nu * np.arange(flat.size, dtype=np.int64)) % flat.size
        amp[j] = abs(np.dot(flat, np.exp(-2j * np.pi * k / flat.size)))
    idx = local_minima(amp)
    return np.asarray(b_grid)[idx], amp


def neighborhood_median(values, half_width=2):
    """Median over a centred window of +-half_width points, clipped at the ends."""
    v = np.asarray(values, dtype=float)
    out = np.empty_like(v)
    for j in range(v.size):
        out[j] = np.median(v[max(0, j - half_width): j + half_width + 1])
    return out


def snr_point(schedule, seq, field, det, consts, cfg, nu=None, convention="quarter",
              analytic=True, tag="robustness"):
    """Correlation, first-harmonic and max-bin SNR at one operating point.

    All three estimators are evaluated on the same simulated counts.
    """
    if nu is None:
        nu = mc.first_harmonic_bin(schedule, field.omega)
    ests = (mc.Estimator.VARIANCE, mc.Estimator.PERIODOGRAM, mc.Estimator.PERIODOGRAM_MAX)
    grid = mc.build_lambda_grid(schedule, seq, field, det, consts, convention)
    vals = mc.simulate_trials(grid, cfg, ests, schedule.mode, nu, tag=tag)
    base = mc.correlation_baseline(schedule, seq, field, det, consts, convention)
    out = {"snr_corr": mc.summarize(vals[:, 0], base)[2],
           "snr_sync_h1": mc.summarize(vals[:, 1])[2],
           "snr_sync_max": mc.summarize(vals[:, 2])[2]}
    if analytic:
        out["snr_corr_analytic"] = mc.analytic_correlation_snr(schedule, seq, field, det, consts,
                                                               True, convention)
        out["snr_sync_h1_analytic"] = mc.analytic_sync_snr(schedule, seq, field, det, consts,
                                                           nu, convention)
    return out


def robustness_curve(schedule, seq, det, consts, omega, b_values, cfg, nu=None,
                     convention="quarter", analytic=True):
    """SNR against field amplitude for correlation, first-harmonic and max-bin readout.

    Every field amplitude reuses the same per-trial random streams.
    """
    cols = {"B": np.asarray(b_values, dtype=float)}
    rows = [snr_point(schedule, seq, AcField(omega, b), det, consts, cfg, nu, convention, analytic)
            for b in b_values]
    for k in rows[0] if rows else ():
        cols[k] = np.array([r[k] for r in rows], dtype=float)
    return cols


@dataclass
class TwoToneResult:
    t_d: float
    mean_correlated: float
    std_correlated: float
    mean_detuned: float
    std_detuned: float

    @property
    def separation(self):
        """Difference of means in units of the combined single-trial spread."""
        return (self.mean_correlated - self.mean_detuned) / math.hypot(self.std_correlated,
                                                                        self.std_detuned)


def resolve_two_tones(schedule, seq, field, delta_omega, det, consts, cfg, convention="quarter"):
    """Simulate two fields split by delta_omega with N_s*t_d = pi/delta_omega.

    t_d is snapped to a correlated delay of the first field; the second field
    (omega + delta_omega) then sits on its first interference zero. Both use
    the same schedule, so only the field frequency differs between the runs.
    """
    if not delta_omega > 0:
        raise DomainError("delta_omega must be > 0")
    n_s = schedule.n_s
    if n_s < 2:
        raise DomainError("two-tone discrimination needs n_s >= 2")
    m = max(1, round(field.omega / (n_s * delta_omega)))
    t_d = m * math.pi / field.omega
    sched = replace(schedule, t_d=t_d)
    second = AcField(field.omega + math.pi / (n_s * t_d), field.amplitude, field.phi0)
    out = []
    for f in (field, second):
        grid = mc.build_lambda_grid(sched, seq, f, det, consts, convention)
        vals = mc.simulate_trials(grid, cfg, [mc.Estimator.VARIANCE], sched.mode,
                                  tag="two-tone")[:, 0]
        out.append((float(vals.mean()), float(vals.std(ddof=1))))
    return TwoToneResult(t_d, out[0][0], out[0][1], out[1][0], out[1][1])
