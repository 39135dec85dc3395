"""Rotation-phase-dependent Rabi physics.

The microwave magnetic field lies in the yz plane, tilted by theta' from z:
n_MW = (0, -sin(theta'), cos(theta')).  As the particle rotates, the NV axis
direction n_NV(phi) sweeps around z and the transverse drive projection, and
with it the Rabi frequency, becomes a function of the rotation phase phi at
which the pulse is applied.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from ._fast import rk4_nv_batch
from .berry import ResonanceQuery, drive_operator, resonance_frequency
from .errors import OffResonance
from .nv_model import (
    S_Z2,
    azimuthal_rate,
    eigenstate_columns,
    ms_index,
    rotation_transformation,
)
from .spin_core import S_Z


@dataclass(frozen=True)
class RabiGeometry:
    """NV axis polar angle and microwave tilt."""

    theta: float
    theta_prime: float = np.radians(8.5)

    @property
    def n_mw(self):
        """Unit microwave field direction in the yz plane."""
        return np.array([0.0, -np.sin(self.theta_prime), np.cos(self.theta_prime)])


@dataclass(frozen=True)
class PulseSequence:
    """Timing bookkeeping for a phase-synchronized Rabi measurement.

    ``mw_start_phase`` is the rotation phase at which the microwave pulse
    begins.  ``mw_duration`` should stay well below a rotation period for the
    synchronized-phase picture to hold; a warning is issued otherwise.
    """

    mw_start_phase: float      # rad of rotation phase
    mw_duration: float         # s
    rotation_period: float     # s
    init_duration: float = 1.05e-3
    readout_delay: float = 0.0

    def __post_init__(self):
        if min(self.mw_duration, self.rotation_period) <= 0:
            raise ValueError("durations must be positive")
        if self.mw_duration >= self.rotation_period / 10.0:
            warnings.warn(
                "mw_duration is not small against the rotation period; the "
                "fixed-phase Rabi approximation degrades",
                stacklevel=2,
            )


def nv_direction(theta, phi):
    """Unit NV axis (cos(phi) sin(theta), sin(phi) sin(theta), cos(theta))."""
    return np.array(
        [np.cos(phi) * np.sin(theta), np.sin(phi) * np.sin(theta), np.cos(theta)]
    )


def rabi_factor(geom, phi):
    """Transverse drive projection sqrt(1 - (n_NV . n_MW)^2), in [0, 1]."""
    dot = np.cos(geom.theta) * np.cos(geom.theta_prime) - np.sin(
        np.asarray(phi, dtype=float)
    ) * np.sin(geom.theta) * np.sin(geom.theta_prime)
    return np.sqrt(np.maximum(0.0, 1.0 - dot**2))


def phase_sweep(geom, phis, reference_omega=None, reference_phi=np.pi / 2):
    """Rabi frequency versus rotation phase, proportional to ``rabi_factor``.

    When ``reference_omega`` is given the curve is normalized so its value at
    ``reference_phi`` equals that reference (units follow the reference);
    otherwise the bare dimensionless factor is returned.
    """
    phis = np.asarray(phis, dtype=float)
    curve = rabi_factor(geom, phis)
    if reference_omega is not None:
        curve = curve * (reference_omega / rabi_factor(geom, reference_phi))
    return curve


@dataclass(frozen=True)
class RabiTrace:
    pulse_lengths: np.ndarray   # s
    population: np.ndarray      # P_{target}(pulse length)
    omega_fit: float            # rad/s
    target_ms: int


def _fit_rabi(times, population):
    """Fit P(t) = offset - amp cos(omega t) and return omega (rad/s)."""
    pop = np.asarray(population, dtype=float)
    dt = times[1] - times[0]
    spec = np.abs(np.fft.rfft(pop - pop.mean()))
    freqs = np.fft.rfftfreq(len(pop), dt)
    k = int(np.argmax(spec[1:]) + 1)
    omega0 = 2 * np.pi * freqs[k]

    def model(t, off, amp, omega):
        return off - amp * np.cos(omega * t)

    p0 = [pop.mean(), (pop.max() - pop.min()) / 2, omega0]
    popt, _ = curve_fit(model, times, pop, p0=p0, maxfev=20000)
    return abs(popt[2]), popt[0]


def simulate_rabi(cfg, env, seq, target_ms=1, decay_T2rabi=None,
                  n_samples=400, steps_per_rad=10.0):
    """Full time-dependent Rabi trace for a rotating NV under the tilted drive.

    The state starts in the co-rotating |0> eigenstate at rotation phase
    ``seq.mw_start_phase`` and is driven by h_lab(t) plus the microwave term
    (cosine time dependence, both drive components, no rotating-wave
    approximation); the rotation phase advances continuously during the
    pulse.  The target population is sampled along the pulse and fitted with
    a single-frequency cosine.

    Args:
        decay_T2rabi: optional phenomenological coherence time; the sampled
            oscillation is damped about its mean by exp(-t / T2).

    Raises:
        OffResonance: the drive detuning exceeds half the expected Rabi rate.

    Returns:
        :class:`RabiTrace` with the sampled trace and the fitted frequency.
    """
    geom = RabiGeometry(theta=cfg.theta, theta_prime=env.mw_tilt)
    factor = float(rabi_factor(geom, seq.mw_start_phase))
    omega_expected = cfg.gamma_e * env.mw_amplitude * factor / np.sqrt(2)
    # the tilted drive carries both components; gate on the closer channel
    detuning = min(
        abs(env.mw_frequency - resonance_frequency(
            ResonanceQuery(target_ms, comp, cfg, env)))
        for comp in ("longitudinal", "transverse")
    )
    if omega_expected > 0 and detuning > omega_expected / 2:
        raise OffResonance(
            f"drive detuning {detuning:.3g} rad/s exceeds half the expected "
            f"Rabi rate {omega_expected:.3g} rad/s"
        )
    om_phi = azimuthal_rate(env.omega_r)
    phi_start = seq.mw_start_phase
    ry = rotation_transformation(cfg.theta, 0.0)
    a_body = ry @ (cfg.D * S_Z2) @ ry.conj().T
    shift = (cfg.D + cfg.gamma_e * env.B_static) / 2.0
    hs = cfg.gamma_e * env.B_static * S_Z - shift * np.eye(3)
    w = drive_operator(env.mw_tilt)
    amp = cfg.gamma_e * env.mw_amplitude

    lam = max(abs(cfg.D + cfg.gamma_e * env.B_static - shift), shift) + amp
    dt = 1.0 / (steps_per_rad * lam)
    stride = max(1, int(np.ceil(seq.mw_duration / dt / n_samples)))
    n_steps = int(np.ceil(seq.mw_duration / dt / stride)) * stride
    dt = seq.mw_duration / n_steps

    r0 = rotation_transformation(cfg.theta, phi_start)
    out = rk4_nv_batch(
        a=a_body[None],
        hs=hs[None],
        w=w[None],
        phi0=np.array([phi_start]),
        omphi=np.array([om_phi]),
        amp=np.array([amp]),
        omega=np.array([env.mw_frequency]),
        psi0=r0[:, ms_index(0)][None],
        dt=dt,
        n_steps=n_steps,
        stride=stride,
    )[0]
    t_samples = np.arange(out.shape[0]) * (stride * dt)
    phis = phi_start + om_phi * t_samples
    target_states = eigenstate_columns(target_ms, cfg.theta, phis)
    population = np.abs(np.einsum("ki,ki->k", target_states.conj(), out)) ** 2

    omega_fit, offset = _fit_rabi(t_samples, population)
    if decay_T2rabi is not None:
        population = offset + (population - offset) * np.exp(
            -t_samples / decay_T2rabi
        )
    return RabiTrace(
        pulse_lengths=t_samples,
        population=population,
        omega_fit=float(omega_fit),
        target_ms=target_ms,
    )
