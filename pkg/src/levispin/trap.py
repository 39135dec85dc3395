"""Ring surface-trap characterization.

The electrode layout is idealized as a grounded plane with an annulus
a <= r <= b at drive potential; along the symmetry axis z this gives a
closed-form geometric factor, zero-field trapping height, Mathieu-type
secular frequency, and a pseudopotential profile whose barrier toward
z -> infinity is the trap depth.
"""

from dataclasses import dataclass, field

import numpy as np

from .constants import E_CHARGE

MATHIEU_STABILITY_LIMIT = 0.908  # first stability region, q < 0.908 (a = 0)


@dataclass(frozen=True)
class RingTrapGeometry:
    a: float  # inner radius, m
    b: float  # outer radius, m

    def __post_init__(self):
        if not 0 < self.a < self.b:
            raise ValueError("require 0 < a < b")


@dataclass(frozen=True)
class TrapDrive:
    V_d: float  # drive amplitude, volts
    f_d: float  # drive frequency, Hz (cyclic)

    def __post_init__(self):
        if self.V_d <= 0 or self.f_d <= 0:
            raise ValueError("V_d and f_d must be positive")


@dataclass(frozen=True)
class ChargedParticle:
    """Charged sphere; mass defaults to (4/3) pi R^3 rho."""

    Q: float            # coulombs, signed
    radius: float       # m
    density: float      # kg/m^3
    m: float = field(default=None)  # kg; derived from radius+density if None

    def __post_init__(self):
        if self.radius <= 0 or self.density <= 0:
            raise ValueError("radius and density must be positive")
        sphere_mass = 4.0 / 3.0 * np.pi * self.radius**3 * self.density
        if self.m is None:
            object.__setattr__(self, "m", sphere_mass)
        elif abs(self.m - sphere_mass) > 1e-6 * sphere_mass:
            raise ValueError(
                "mass inconsistent with (4/3) pi R^3 rho for the given "
                "radius and density"
            )


@dataclass(frozen=True)
class TrapCharacterization:
    z0: float        # m
    omega_z: float   # rad/s
    q_z: float
    depth: float     # eV
    stable: bool
    margin: float


def geometric_factor(geom):
    """Axial geometric factor of the ring trap, 1/m^2.

    Scale covariance: f(k a, k b) = f(a, b) / k^2.
    """
    a23, b23 = geom.a ** (2 / 3), geom.b ** (2 / 3)
    a43, b43 = a23**2, b23**2
    num = 9.0 * (b23 - a23) ** 2 * (b23 + a23) ** 6
    den = a43 * b43 * (a43 + a23 * b23 + b43) ** 5
    return float(np.sqrt(num / den))


def trap_height(geom):
    """Zero-field trapping height z0 = sqrt(a^{4/3} b^{4/3} / (a^{2/3}+b^{2/3}))."""
    a23, b23 = geom.a ** (2 / 3), geom.b ** (2 / 3)
    return float(np.sqrt(a23**2 * b23**2 / (a23 + b23)))


def secular_frequency(geom, drive, particle):
    """Axial secular frequency and Mathieu q.

    omega_z = Q V_d f(a,b) / (2 sqrt(2) pi m f_d);  q_z = 2 sqrt(2) omega_z /
    (2 pi f_d).
    """
    f = geometric_factor(geom)
    omega_z = abs(particle.Q) * drive.V_d * f / (
        2 * np.sqrt(2) * np.pi * particle.m * drive.f_d
    )
    q_z = 2 * np.sqrt(2) * omega_z / (2 * np.pi * drive.f_d)
    return {"omega_z": float(omega_z), "q_z": float(q_z)}


def stability_check(q_z):
    """First-region Mathieu stability: stable iff q_z < 0.908 (exclusive)."""
    if q_z < 0:
        raise ValueError("q_z must be nonnegative")
    return {
        "stable": bool(q_z < MATHIEU_STABILITY_LIMIT),
        "margin": float(MATHIEU_STABILITY_LIMIT - q_z),
    }


def _grad_axial_field_shape(geom, z):
    """d/dz of the axial potential shape used by the pseudopotential."""
    a, b = geom.a, geom.b
    return a**2 / z**3 * (1 + (a / z) ** 2) ** -1.5 - b**2 / z**3 * (
        1 + (b / z) ** 2
    ) ** -1.5


def pseudopotential_profile(geom, drive, particle, z_grid, harmonic=False):
    """Pseudopotential along z, in eV.

    The full profile is Q^2 V_d^2 / (16 pi^2 m f_d^2) |grad shape|^2; the
    harmonic variant osculates it at z0 with curvature m omega_z^2.

    Args:
        z_grid: positive heights in meters, spanning z0.
    """
    z = np.asarray(z_grid, dtype=float)
    if np.any(z <= 0):
        raise ValueError("z_grid must be positive")
    z0 = trap_height(geom)
    if not (z.min() <= z0 <= z.max()):
        raise ValueError("z_grid must span the trapping height z0")
    c = particle.Q**2 * drive.V_d**2 / (16 * np.pi**2 * particle.m * drive.f_d**2)
    if harmonic:
        omega_z = secular_frequency(geom, drive, particle)["omega_z"]
        v = 0.5 * particle.m * omega_z**2 * (z - z0) ** 2
    else:
        v = c * _grad_axial_field_shape(geom, z) ** 2
    return v / E_CHARGE


def well_depth(geom, drive, particle, n_grid=20001):
    """Barrier height from z0 toward z -> infinity (escape above the chip), eV."""
    z0 = trap_height(geom)
    z = np.linspace(z0, 40 * z0, n_grid)
    v = pseudopotential_profile(geom, drive, particle, z)
    return float(v.max())


def characterize(geom, drive, particle):
    """Full trap characterization record."""
    sec = secular_frequency(geom, drive, particle)
    stab = stability_check(sec["q_z"])
    return TrapCharacterization(
        z0=trap_height(geom),
        omega_z=sec["omega_z"],
        q_z=sec["q_z"],
        depth=well_depth(geom, drive, particle),
        stable=stab["stable"],
        margin=stab["margin"],
    )
