"""Stochastic center-of-mass dynamics, PSD estimation, and velocity feedback.

Each trap axis is an independent harmonic mode obeying

    x'' = -omega0^2 x - gamma x' + F_th/(m) + F_fb/m,

integrated with a BAOAB splitting whose damping/noise substep is the exact
Ornstein-Uhlenbeck update, so equilibrium statistics are correct at finite
step size.  Thermal forcing satisfies fluctuation-dissipation,
sigma_F = sqrt(2 k_B T gamma m) per unit sqrt(time).

The feedback path mirrors a bandpass -> quarter-period delay -> gain chain
acting on the position signal (velocity surrogate -omega0 x(t - pi/2omega0)),
with an idealized true-velocity mode for analytic comparison
(T_eff = T gamma / (gamma + g)).
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.signal import butter, welch

from .constants import K_B
from .errors import (
    ConvergenceFailure,
    NoSolution,
    PeakNotResolved,
    StepTooLarge,
    TooFewSegments,
)

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False


@dataclass(frozen=True)
class HarmonicMode:
    axis: str                 # 'x', 'y' or 'z'
    omega0: float             # rad/s
    mass: float               # kg
    gamma_t: float            # translational damping, 1/s
    bath_T: float             # K

    def __post_init__(self):
        if self.omega0 <= 0 or self.mass <= 0 or self.gamma_t < 0:
            raise ValueError("omega0, mass must be positive; gamma_t >= 0")


@dataclass(frozen=True)
class FeedbackConfig:
    """Velocity-proportional damping feedback.

    ``mode='velocity'`` feeds back the true velocity (ideal cold damping);
    ``mode='delayed_position'`` derives a velocity surrogate from the
    position signal via an optional bandpass filter and a quarter-period
    delay (the pi/2 phase shift at omega0).
    """

    gain: float                        # 1/s
    mode: str = "velocity"
    phase_delay: float = np.pi / 2     # rad at omega0, delayed_position mode
    bandpass: tuple = None             # (low, high) rad/s, or None

    def __post_init__(self):
        if self.gain < 0:
            raise ValueError("gain must be >= 0")
        if self.mode not in ("velocity", "delayed_position"):
            raise ValueError("mode must be 'velocity' or 'delayed_position'")


@dataclass(frozen=True)
class TimeSeries:
    dt: float
    samples: np.ndarray       # positions, m
    seed: int
    velocities: np.ndarray = None


@dataclass(frozen=True)
class PSDEstimate:
    freq: np.ndarray          # Hz
    values: np.ndarray        # m^2/Hz, one-sided (integral over f >= 0 = <x^2>)
    segment_count: int
    window: str


@dataclass(frozen=True)
class LorentzianFitResult:
    omega0_fit: float         # rad/s
    gamma_fit: float          # 1/s
    T_eff: float              # K
    noise_floor: float        # m^2/Hz
    uncertainty: dict         # 1-sigma from the fit covariance


def _baoab_python(x, v, omega0, gamma, sigma_v, dt, noise, gain, mode_flag,
                  delay_steps, use_bp, bp_b, bp_a):
    c1 = np.exp(-gamma * dt)
    c2 = np.sqrt(max(0.0, 1.0 - c1 * c1))
    n = len(noise)
    xs = np.empty(n + 1)
    vs = np.empty(n + 1)
    xs[0], vs[0] = x, v
    buf = np.zeros(max(delay_steps, 1))
    z1 = z2 = 0.0
    for k in range(n):
        if mode_flag == 1:
            a_fb = -gain * v
        elif mode_flag == 2:
            xf = xs[k]
            if use_bp:
                y = bp_b[0] * xf + z1
                z1 = bp_b[1] * xf - bp_a[1] * y + z2
                z2 = bp_b[2] * xf - bp_a[2] * y
                xf = y
            idx = k % len(buf)
            delayed = buf[idx] if k >= delay_steps else 0.0
            buf[idx] = xf
            a_fb = -gain * (-omega0 * delayed)
        else:
            a_fb = 0.0
        v += 0.5 * dt * (-omega0 * omega0 * x + a_fb)
        x += 0.5 * dt * v
        v = c1 * v + c2 * sigma_v * noise[k]
        x += 0.5 * dt * v
        v += 0.5 * dt * (-omega0 * omega0 * x + a_fb)
        xs[k + 1], vs[k + 1] = x, v
    return xs, vs


if _HAVE_NUMBA:
    _baoab_kernel = njit(cache=True)(_baoab_python)
else:  # pragma: no cover
    _baoab_kernel = _baoab_python


def simulate_com(modes, duration, dt, seed, feedback=None, x0=0.0, v0=0.0):
    """Seeded Langevin trajectories for independent harmonic modes.

    Args:
        modes: iterable of :class:`HarmonicMode`.
        feedback: optional :class:`FeedbackConfig` applied to every mode.
        seed: base seed; per-axis streams are derived as (seed, mode index),
            so parallel axis ordering cannot change the noise.
        x0, v0: common initial displacement and velocity.

    Returns:
        dict mapping axis name to :class:`TimeSeries` (positions and
        velocities).

    Raises:
        StepTooLarge: dt above 0.05 periods of the fastest mode.
    """
    modes = list(modes)
    max_omega = max(m.omega0 for m in modes)
    if dt > 0.05 * 2 * np.pi / max_omega:
        raise StepTooLarge("require dt <= 0.05 * 2 pi / max(omega0)")
    n_steps = int(np.round(duration / dt))
    out = {}
    for i, mode in enumerate(modes):
        rng = np.random.default_rng([seed, i])
        noise = rng.standard_normal(n_steps)
        sigma_v = np.sqrt(K_B * mode.bath_T / mode.mass)
        mode_flag = 0
        gain = 0.0
        delay_steps = 1
        use_bp = False
        bp_b = np.zeros(3)
        bp_a = np.zeros(3)
        if feedback is not None and feedback.gain > 0:
            gain = feedback.gain
            mode_flag = 1 if feedback.mode == "velocity" else 2
            delay_steps = max(1, int(round(feedback.phase_delay / mode.omega0 / dt)))
            if feedback.bandpass is not None:
                lo, hi = feedback.bandpass
                nyq = np.pi / dt
                b, a = butter(1, [lo / nyq, hi / nyq], btype="bandpass")
                bp_b, bp_a = np.asarray(b), np.asarray(a)
                use_bp = True
        xs, vs = _baoab_kernel(
            float(x0), float(v0), mode.omega0, mode.gamma_t, sigma_v, dt,
            noise, gain, mode_flag, delay_steps, use_bp, bp_b, bp_a,
        )
        out[mode.axis] = TimeSeries(dt=dt, samples=xs, seed=seed, velocities=vs)
    return out


def psd(series, segment_length, window="hann"):
    """Welch power spectral density of a position time series.

    One-sided density convention: integrating the returned values over
    f >= 0 recovers the series variance (Parseval within a few percent for
    stationary input).

    Raises:
        TooFewSegments: fewer than 4 averaging segments.
    """
    x = np.asarray(series.samples, dtype=float)
    # segment_length <= len/4 and the >= 4 distinct-segment floor are the
    # same condition
    if len(x) // segment_length < 4:
        raise TooFewSegments(
            f"only {len(x) // segment_length} distinct segments; "
            "segment_length must be at most a quarter of the series"
        )
    noverlap = segment_length // 2
    n_segments = 1 + (len(x) - segment_length) // (segment_length - noverlap)
    freq, values = welch(
        x,
        fs=1.0 / series.dt,
        window=window,
        nperseg=segment_length,
        noverlap=noverlap,
        detrend="constant",
        scaling="density",
    )
    return PSDEstimate(freq=freq, values=values, segment_count=int(n_segments),
                       window=window)


def thermal_psd_model(freq_hz, omega0, gamma, temperature, mass, floor=0.0):
    """One-sided thermal-oscillator density 4 gamma k T / m / ((w0^2-w^2)^2+g^2 w^2)."""
    w = 2 * np.pi * np.asarray(freq_hz, dtype=float)
    return (
        4.0 * gamma * K_B * temperature / mass
        / ((omega0**2 - w**2) ** 2 + gamma**2 * w**2)
        + floor
    )


def fit_lorentzian_psd(estimate, mass, peak_floor_ratio=3.0):
    """Fit the thermal-oscillator model to a PSD estimate.

    Maximizes the Whittle likelihood sum(ln M + S/M) over a band around the
    peak (a third to three times the peak frequency): Welch bins carry
    multiplicative chi-square noise for which this is the asymptotically
    unbiased estimator, and the far sampled-data wings, which roll off
    against the continuous model toward Nyquist, stay out of the fit.
    Seeds come from the peak position, the spectral area, and the far tail.

    Raises:
        PeakNotResolved: peak below ``peak_floor_ratio`` times the floor.
        ConvergenceFailure: optimizer failure.
    """
    f, s = estimate.freq, estimate.values
    mask = f > 0
    f, s = f[mask], s[mask]
    floor0 = float(np.median(s[f > 0.8 * f.max()]))
    # restrict to a band around the peak: the continuous-oscillator model
    # holds there, while the far wings of sampled data roll off toward
    # Nyquist and would otherwise dominate the fit
    f0_est = f[int(np.argmax(s))]
    band = (f >= f0_est / 3.0) & (f <= 3.0 * f0_est)
    f, s = f[band], s[band]
    peak_idx = int(np.argmax(s))
    peak = float(s[peak_idx])
    if floor0 <= 0:
        floor0 = peak * 1e-12
    if peak < peak_floor_ratio * floor0:
        raise PeakNotResolved(
            f"peak/floor = {peak / floor0:.2f} < {peak_floor_ratio}"
        )
    omega0_0 = 2 * np.pi * f[peak_idx]
    area = float(np.trapezoid(np.maximum(s - floor0, 0.0), f))
    gamma_0 = max(4.0 * area / peak, 1e-6 * omega0_0)
    temp_0 = area * mass * omega0_0**2 / K_B
    scale = np.array([omega0_0, gamma_0, max(temp_0, 1e-12),
                      max(floor0, peak * 1e-9)])

    def nll(q):
        omega0, gamma, temp, floor = np.abs(q) * scale
        model = thermal_psd_model(f, omega0, gamma, temp, mass, floor)
        return float(np.sum(np.log(model) + s / model))

    res = minimize(
        nll, np.ones(4), method="Nelder-Mead",
        options={"xatol": 1e-12, "fatol": 1e-10,
                 "maxiter": 40000, "maxfev": 40000},
    )
    if not res.success:
        raise ConvergenceFailure(res.message)
    omega0, gamma, temp, floor = np.abs(res.x) * scale

    # 1-sigma from the numerical Hessian of the likelihood at the optimum
    uncertainty = dict(zip(
        ("omega0", "gamma", "T_eff", "noise_floor"),
        _nll_sigmas(nll, np.abs(res.x)) * scale,
    ))
    return LorentzianFitResult(
        omega0_fit=float(omega0),
        gamma_fit=float(gamma),
        T_eff=float(temp),
        noise_floor=float(floor),
        uncertainty={k: float(v) for k, v in uncertainty.items()},
    )


def _nll_sigmas(nll, q_opt, rel_step=1e-4):
    """Diagonal 1-sigma estimates from a finite-difference Hessian."""
    n = len(q_opt)
    hess = np.zeros((n, n))
    h = np.maximum(np.abs(q_opt), 1e-8) * rel_step
    for i in range(n):
        for j in range(i, n):
            ei = np.zeros(n); ei[i] = h[i]
            ej = np.zeros(n); ej[j] = h[j]
            fpp = nll(q_opt + ei + ej)
            fpm = nll(q_opt + ei - ej)
            fmp = nll(q_opt - ei + ej)
            fmm = nll(q_opt - ei - ej)
            hess[i, j] = hess[j, i] = (fpp - fpm - fmp + fmm) / (4 * h[i] * h[j])
    # pseudo-inverse: flat directions (e.g. an absent noise floor) produce
    # large-but-finite uncertainties instead of a singular failure
    cov = np.linalg.pinv(hess, rcond=1e-10)
    return np.sqrt(np.abs(np.diag(cov)))


def area_temperature(estimate, mass, omega0, noise_floor=0.0):
    """Equipartition temperature m omega0^2 <x^2> / k_B from the PSD area."""
    var = float(np.trapezoid(np.maximum(estimate.values - noise_floor, 0.0),
                             estimate.freq))
    return mass * omega0**2 * var / K_B


# -- radius inference --------------------------------------------------------

# free-molecular (Epstein, diffuse reflection) drag coefficient
EPSTEIN_DELTA = 1.0 + np.pi / 8.0


def translational_damping_rate(radius, density, gas, delta=EPSTEIN_DELTA):
    """Kinetic-theory translational damping of a sphere, 1/s.

    gamma_t = delta * p * sqrt(8 m_gas / (pi k_B T0)) / (rho R); the
    dimensionless prefactor ``delta`` is configuration (default Epstein
    diffuse-reflection value 1 + pi/8).
    """
    speed_factor = np.sqrt(8.0 * gas.molecular_mass / (np.pi * K_B * gas.T0))
    return float(delta * gas.pressure * speed_factor / (density * radius))


def infer_radius(fit, gas, density, delta=EPSTEIN_DELTA):
    """Particle radius solving gamma_t(R; p, rho) = fitted damping rate.

    For the configured 1/R damping model the solution is closed form and the
    inferred radius grows linearly with pressure at fixed fitted damping.

    Raises:
        NoSolution: nonpositive fitted damping rate.
    """
    if fit.gamma_fit <= 0:
        raise NoSolution("fitted damping rate must be positive")
    speed_factor = np.sqrt(8.0 * gas.molecular_mass / (np.pi * K_B * gas.T0))
    return float(delta * gas.pressure * speed_factor / (density * fit.gamma_fit))
