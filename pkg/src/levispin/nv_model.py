"""NV spin Hamiltonians in the laboratory and rotating frames.

Geometry: the particle rotates about the lab z axis; the NV axis sits at
polar angle ``theta`` from z with azimuth ``phi(t)``.  The static field B is
along z.

Sign convention for rotation: the user-facing ``omega_r`` is signed with
positive meaning *clockwise viewed from +z* (the sense used for the main
resonance-shift measurements).  Internally the azimuth follows the standard
mathematical convention (counterclockwise positive), so the azimuthal rate is
``-omega_r``; :func:`azimuthal_rate` is the single place that conversion
happens.  With this choice the m_s = +1 resonance driven by the longitudinal
microwave component rises with clockwise rotation rate and falls with
counterclockwise rate.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .constants import D_ZFS, GAMMA_E
from .errors import ZeroGyromagneticRatio
from .spin_core import BASIS_MS, S_X, S_Y, S_Z, rotation_operator

S_Z2 = (S_Z @ S_Z).copy()


def azimuthal_rate(omega_r_signed):
    """Map the signed (clockwise-positive) rotation rate to d(phi)/dt."""
    return -omega_r_signed


@dataclass(frozen=True)
class NVConfiguration:
    """Orientation and spin parameters of a single NV center.

    Attributes:
        theta: angle between NV axis and rotation axis z, radians in [0, pi].
        phi0: initial azimuth of the NV axis, radians.
        D: zero-field splitting, rad/s.
        E: strain splitting of the m_s = +-1 pair, rad/s (must stay << D).
        gamma_e: electron gyromagnetic ratio, rad/s per tesla.
    """

    theta: float
    phi0: float = 0.0
    D: float = D_ZFS
    E: float = 0.0
    gamma_e: float = GAMMA_E

    def __post_init__(self):
        if not 0.0 <= self.theta <= np.pi:
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")
        if self.D <= 0:
            raise ValueError("D must be positive")
        if self.E < 0:
            raise ValueError("E must be nonnegative")
        if self.E >= self.D / 10.0:
            raise ValueError("strain E must satisfy E < D/10")


@dataclass(frozen=True)
class FieldEnvironment:
    """Static field, rotation, and microwave drive parameters.

    Attributes:
        B_static: field along lab z, tesla.
        omega_r: signed rotation rate, rad/s; positive = clockwise from +z.
        mw_amplitude: microwave magnetic amplitude B_MW, tesla.
        mw_frequency: microwave angular frequency, rad/s.
        mw_tilt: microwave field tilt from z, radians; the field lies in the
            yz plane, direction (0, -sin(tilt), cos(tilt)).
    """

    B_static: float = 0.0
    omega_r: float = 0.0
    mw_amplitude: float = 0.0
    mw_frequency: float = 0.0
    mw_tilt: float = np.radians(8.5)

    def validate_adiabatic(self, cfg):
        """Warn when |omega_r| is not small against D (perturbative regime)."""
        if abs(self.omega_r) >= cfg.D:
            warnings.warn(
                "rotation rate exceeds the zero-field splitting; the "
                "perturbative rotating-frame treatment is unreliable",
                stacklevel=2,
            )


@dataclass(frozen=True)
class PseudoField:
    """Effective magnetic field seen in the co-rotating frame."""

    magnitude: float                 # tesla
    gyromagnetic_ratio_used: float   # rad/s per tesla


def pseudo_field(omega_r, gamma):
    """Rotational pseudo-field magnitude |omega_r / gamma|."""
    if gamma == 0:
        raise ZeroGyromagneticRatio("gamma must be nonzero")
    return PseudoField(magnitude=abs(omega_r / gamma), gyromagnetic_ratio_used=gamma)


def h_zero_field_static(cfg):
    """Static zero-field Hamiltonian D S_z^2 + E (S_x^2 - S_y^2), rad/s."""
    return cfg.D * S_Z2 + cfg.E * (S_X @ S_X - S_Y @ S_Y)


def rotation_transformation(theta, phi):
    """R = R_z(phi) R_y(theta): carries the body frame into the lab frame."""
    return rotation_operator("z", phi) @ rotation_operator("y", theta)


def nv_azimuth(cfg, env, t):
    """Azimuth phi(t) of the NV axis under the signed rotation convention."""
    return cfg.phi0 + azimuthal_rate(env.omega_r) * t


def h_lab(cfg, env, t):
    """Lab-frame Hamiltonian R(t) D S_z^2 R(t)^dag + gamma_e B S_z, rad/s.

    Strain is deliberately omitted here (it is carried by the zero-field
    static Hamiltonian and recombined as a dip splitting by the ODMR layer).
    """
    r = rotation_transformation(cfg.theta, nv_azimuth(cfg, env, t))
    return r @ (cfg.D * S_Z2) @ r.conj().T + cfg.gamma_e * env.B_static * S_Z


def eigenstates_lab(cfg, env, t):
    """Instantaneous co-rotating eigenstates R(t)|m_s> of the lab Hamiltonian.

    Returns:
        dict mapping m_s in {+1, 0, -1} to a unit 3-vector.
    """
    r = rotation_transformation(cfg.theta, nv_azimuth(cfg, env, t))
    return {1: r[:, 0].copy(), 0: r[:, 1].copy(), -1: r[:, 2].copy()}


def eigenstate_columns(ms, thetas, phis):
    """Co-rotating eigenstate R(theta, phi)|m_s> along arrays of angles.

    Vectorized closed form of the R = R_z(phi) R_y(theta) columns; returns an
    array of shape broadcast(thetas, phis) + (3,).
    """
    thetas = np.asarray(thetas, dtype=float)
    phis = np.asarray(phis, dtype=float)
    c2 = np.cos(thetas / 2) ** 2
    s2 = np.sin(thetas / 2) ** 2
    s = np.sin(thetas) / np.sqrt(2)
    em = np.exp(-1j * phis)
    ep = np.exp(1j * phis)
    one = np.ones(np.broadcast_shapes(thetas.shape, phis.shape))
    if ms == 1:
        comps = (em * c2, s * one, ep * s2)
    elif ms == 0:
        comps = (-em * s, np.cos(thetas) * one, ep * s)
    elif ms == -1:
        comps = (em * s2, -s * one, ep * c2)
    else:
        raise ValueError("ms must be one of -1, 0, +1")
    return np.stack(np.broadcast_arrays(*comps), axis=-1)


def h_rot(cfg, env):
    """Rotating-frame Hamiltonian, full and secular forms.

    The full form is U H_lab U^dag + i (d_t U) U^dag with
    U = e^{i theta S_y} e^{i phi S_z}; it is time independent and equals
    D S_z^2 + (gamma_e B - d(phi)/dt) (cos(theta) S_z - sin(theta) S_x).
    The secular form keeps only the diagonal first-order entries
    {D + (gamma_e B - d(phi)/dt) cos(theta), 0, D - (...) cos(theta)}.

    Returns:
        dict with keys ``full`` and ``secular``.
    """
    om_phi = azimuthal_rate(env.omega_r)
    u0 = rotation_transformation(cfg.theta, nv_azimuth(cfg, env, 0.0)).conj().T
    lab0 = h_lab(cfg, env, 0.0)
    pseudo = -om_phi * (np.cos(cfg.theta) * S_Z - np.sin(cfg.theta) * S_X)
    full = u0 @ lab0 @ u0.conj().T + pseudo
    shift = (cfg.gamma_e * env.B_static - om_phi) * np.cos(cfg.theta)
    secular = np.diag([cfg.D + shift, 0.0, cfg.D - shift]).astype(complex)
    return {"full": full, "secular": secular}


def ms_index(ms):
    """Column index of m_s in the fixed (+1, 0, -1) basis ordering."""
    idx = np.where(BASIS_MS == ms)[0]
    if len(idx) != 1:
        raise ValueError(f"m_s must be one of +1, 0, -1, got {ms}")
    return int(idx[0])
