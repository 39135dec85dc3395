"""Geometric-phase evaluation and microwave resonance frequencies.

Analytic phases and resonance formulas are written in terms of the azimuthal
rate d(phi)/dt (standard counterclockwise-positive convention, the symbol the
closed-form expressions are usually quoted in).  Functions that accept a
:class:`~levispin.nv_model.FieldEnvironment` convert its clockwise-positive
``omega_r`` through :func:`~levispin.nv_model.azimuthal_rate`, so the two
rotation senses produce opposite resonance-shift signs: the m_s = +1
longitudinal resonance rises with clockwise rate and falls with
counterclockwise rate.
"""

from dataclasses import dataclass

import numpy as np

from ._fast import rk4_nv_batch
from .errors import NoPeakFound, PathTooCoarse
from .nv_model import (
    S_Z2,
    FieldEnvironment,
    NVConfiguration,
    azimuthal_rate,
    eigenstate_columns,
    ms_index,
    rotation_transformation,
)
from .spin_core import S_Y, S_Z


@dataclass(frozen=True)
class ResonanceQuery:
    """A single |0> -> |m_s> transition under one drive component."""

    target_ms: int
    drive_component: str  # "longitudinal" or "transverse"
    cfg: NVConfiguration
    env: FieldEnvironment

    def __post_init__(self):
        if self.target_ms not in (+1, -1):
            raise ValueError("target_ms must be +1 or -1")
        if self.drive_component not in ("longitudinal", "transverse"):
            raise ValueError("drive_component must be 'longitudinal' or 'transverse'")


@dataclass(frozen=True)
class BerryPhaseResult:
    phase: float            # radians
    path_type: str          # "open" or "closed_loop"


def berry_phase_open(ms, theta, omega_phi, t):
    """Open-path geometric phase m_s * omega_phi * t * cos(theta).

    ``omega_phi`` is the azimuthal rate d(phi)/dt.  The value is reported
    unreduced (the open-path phase is gauge dependent).
    """
    if ms not in (-1, 0, 1):
        raise ValueError("ms must be one of -1, 0, +1")
    return BerryPhaseResult(phase=ms * omega_phi * t * np.cos(theta), path_type="open")


def _reduce_closed(phase):
    """Reduce a phase into (-2 pi, 0]."""
    r = phase % (2 * np.pi)
    return r - 2 * np.pi if r > 0 else 0.0


def berry_phase_closed(ms, theta):
    """Gauge-invariant one-loop phase -2 pi m_s (1 - cos(theta)), in (-2pi, 0]."""
    if ms not in (-1, 0, 1):
        raise ValueError("ms must be one of -1, 0, +1")
    return BerryPhaseResult(
        phase=_reduce_closed(-2 * np.pi * ms * (1 - np.cos(theta))),
        path_type="closed_loop",
    )


def berry_phase_numeric(ms, thetas, phis, min_overlap=0.999):
    """Discrete overlap-sum geometric phase along a sampled (theta, phi) path.

    Uses gamma = -sum_k arg <m_s, k | m_s, k+1>, the discretization of the
    integral i * int <m|d/dt|m> dt over the co-rotating eigenstates.

    Raises:
        PathTooCoarse: when any successive overlap magnitude drops below
            ``min_overlap``.
    """
    if ms not in (-1, 0, 1):
        raise ValueError("ms must be one of -1, 0, +1")
    thetas = np.asarray(thetas, dtype=float)
    phis = np.asarray(phis, dtype=float)
    states = eigenstate_columns(ms, np.broadcast_to(thetas, phis.shape), phis)
    overlaps = np.einsum("ki,ki->k", states[:-1].conj(), states[1:])
    if np.abs(overlaps).min() < min_overlap:
        raise PathTooCoarse(
            f"minimum successive overlap {np.abs(overlaps).min():.6f} < {min_overlap}"
        )
    return BerryPhaseResult(phase=float(-np.angle(overlaps).sum()), path_type="open")


def resonance_frequency(q):
    """Analytic |0> -> |m_s| resonance of the queried drive component, rad/s.

    Longitudinal component: D + m_s gamma_e B cos(theta) - m_s omega_phi
    cos(theta); the transverse component replaces the geometric shift with
    + m_s omega_phi (1 - cos(theta)) (geometric plus rotational-Doppler term).
    """
    cfg, env = q.cfg, q.env
    om_phi = azimuthal_rate(env.omega_r)
    cos_t = np.cos(cfg.theta)
    zeeman = q.target_ms * cfg.gamma_e * env.B_static * cos_t
    if q.drive_component == "longitudinal":
        shift = -q.target_ms * om_phi * cos_t
    else:
        shift = q.target_ms * om_phi * (1 - cos_t)
    return cfg.D + zeeman + shift


def drive_operator(mw_tilt):
    """Unit-amplitude microwave coupling n_MW . S for the yz-plane field.

    The field direction is (0, -sin(tilt), cos(tilt)), so the operator is
    cos(tilt) S_z - sin(tilt) S_y.  This sign ties the rotation-phase
    dependence of the Rabi rate to the geometry factor (minimum at
    phi = 3 pi / 2); the opposite S_y sign would mirror the phase axis.
    """
    return np.cos(mw_tilt) * S_Z - np.sin(mw_tilt) * S_Y


def transition_element(cfg, env, target_ms):
    """|<m_s,0| W |0,0>| for the tilted drive between co-rotating eigenstates."""
    r = rotation_transformation(cfg.theta, cfg.phi0)
    w_body = r.conj().T @ drive_operator(env.mw_tilt) @ r
    return float(np.abs(w_body[ms_index(target_ms), ms_index(0)]))


def resonance_from_dynamics(q, sweep, pulse_factor=1.2, steps_per_rad=10.0):
    """Locate the resonance by full lab-frame propagation over a sweep.

    For every drive frequency in ``sweep`` the state is prepared in the
    co-rotating |0> eigenstate and propagated under h_lab(t) plus the tilted
    microwave term (cosine time dependence, no rotating-wave approximation);
    the peak of the final |<m_s|psi>|^2 transfer is refined by quadratic
    interpolation around the grid maximum.

    The pulse length is ``pulse_factor`` * pi / kappa with kappa the drive
    matrix element, slightly past a pi pulse so the transfer maximum has
    nonzero curvature.  A constant multiple of the identity is subtracted
    from the Hamiltonian before integration (pure global phase) to reduce
    integrator norm drift; populations are unaffected.

    Args:
        q: resonance query (env.mw_amplitude sets the drive strength).
        sweep: frequency grid in rad/s; must bracket the analytic prediction
            with spacing at most kappa / 5.

    Returns:
        Peak drive frequency in rad/s.

    Raises:
        NoPeakFound: maximum transfer below 0.5, or no drive matrix element.
    """
    cfg, env = q.cfg, q.env
    sweep = np.asarray(sweep, dtype=float)
    if sweep.ndim != 1 or len(sweep) < 5:
        raise ValueError("sweep must be a 1-d grid of at least 5 frequencies")
    analytic = resonance_frequency(q)
    if not (sweep.min() <= analytic <= sweep.max()):
        raise ValueError("sweep must bracket the analytic resonance prediction")

    elem = transition_element(cfg, env, q.target_ms)
    kappa = cfg.gamma_e * env.mw_amplitude * elem
    if elem <= 1e-9 or kappa <= 0:
        raise NoPeakFound(
            "drive has no matrix element for this geometry (kappa = 0)"
        )
    spacing = np.diff(sweep).max()
    if spacing > kappa / 5 * (1 + 1e-9):
        raise ValueError(
            f"sweep spacing {spacing:.3g} rad/s exceeds Rabi linewidth/5 "
            f"({kappa / 5:.3g} rad/s)"
        )

    t_pulse = pulse_factor * np.pi / kappa
    om_phi = azimuthal_rate(env.omega_r)

    ry = rotation_transformation(cfg.theta, 0.0)
    a_body = ry @ (cfg.D * S_Z2) @ ry.conj().T
    shift = (cfg.D + cfg.gamma_e * env.B_static) / 2.0
    hs = cfg.gamma_e * env.B_static * S_Z - shift * np.eye(3)
    w = drive_operator(env.mw_tilt)
    amp = cfg.gamma_e * env.mw_amplitude

    lam = max(abs(cfg.D + cfg.gamma_e * env.B_static - shift), shift) + amp
    dt = 1.0 / (steps_per_rad * lam)
    n_steps = int(np.ceil(t_pulse / dt))
    dt = t_pulse / n_steps

    n = len(sweep)
    r0 = rotation_transformation(cfg.theta, cfg.phi0)
    psi0 = np.tile(r0[:, ms_index(0)], (n, 1))
    out = rk4_nv_batch(
        a=np.tile(a_body, (n, 1, 1)),
        hs=np.tile(hs, (n, 1, 1)),
        w=np.tile(w, (n, 1, 1)),
        phi0=np.full(n, cfg.phi0),
        omphi=np.full(n, om_phi),
        amp=np.full(n, amp),
        omega=sweep,
        psi0=psi0,
        dt=dt,
        n_steps=n_steps,
    )
    t_end = n_steps * dt
    r_end = rotation_transformation(cfg.theta, cfg.phi0 + om_phi * t_end)
    target = r_end[:, ms_index(q.target_ms)]
    transfer = np.abs(out[:, -1, :] @ target.conj()) ** 2

    i = int(np.argmax(transfer))
    if transfer[i] < 0.5:
        raise NoPeakFound(
            f"maximum transfer {transfer[i]:.3f} < 0.5 inside the sweep window"
        )
    if 0 < i < n - 1:
        y0, y1, y2 = transfer[i - 1], transfer[i], transfer[i + 1]
        denom = y0 - 2 * y1 + y2
        offset = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
        return float(sweep[i] + offset * (sweep[1] - sweep[0]))
    return float(sweep[i])
