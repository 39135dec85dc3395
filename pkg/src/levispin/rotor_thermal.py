"""Driven-rotor dynamics in rarefied gas and internal-temperature balance.

All quantities are SI here (pressure in Pa, intensity in W/m^2, absorption in
1/m); paper-native units (Torr, W/mm^2, 1/cm) are converted at the CLI
boundary.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, least_squares

from .constants import (
    AIR_HEAT_CAPACITY_RATIO,
    AIR_MOLAR_MASS_KG,
    C_LIGHT,
    HBAR,
    K_B,
    ZETA_5,
    mean_thermal_speed,
)
from .errors import NoBracket, SingularDesign, StepTooLarge, ZeroDamping


@dataclass(frozen=True)
class GasEnvironment:
    """Rarefied-gas surroundings of the levitated particle."""

    pressure: float                 # Pa
    T0: float = 298.0               # K
    mean_speed: float = None        # m/s; from T0 and molecular mass if None
    gamma_prime: float = AIR_HEAT_CAPACITY_RATIO
    kappa: float = 1.0              # thermal accommodation
    eta_prime: float = 1.0          # momentum accommodation
    molecular_mass: float = AIR_MOLAR_MASS_KG  # kg

    def __post_init__(self):
        if self.pressure < 0 or self.T0 <= 0:
            raise ValueError("pressure must be >= 0 and T0 > 0")
        if self.mean_speed is None:
            object.__setattr__(
                self, "mean_speed", mean_thermal_speed(self.T0, self.molecular_mass)
            )


@dataclass(frozen=True)
class OpticalHeating:
    """Laser heating: list of (wavelength tag, intensity W/m^2, absorption 1/m)."""

    lines: tuple
    particle_volume: float          # m^3

    def __post_init__(self):
        for tag, intensity, absorption in self.lines:
            if intensity < 0 or absorption < 0:
                raise ValueError(f"negative intensity/absorption for {tag!r}")

    def absorbed_power(self):
        """A_a = sum_lambda eta_lambda I_lambda V, watts."""
        return sum(ab * i for _, i, ab in self.lines) * self.particle_volume


@dataclass(frozen=True)
class BlackBodyModel:
    """Black-body cooling rate A_bb (T^5 - T0^5), coefficient in W/K^5."""

    coefficient: float

    @classmethod
    def from_permittivity(cls, volume, im_eps):
        """Build from the particle volume and Im((eps - 1)/(eps + 2))."""
        if im_eps <= 0:
            raise ValueError("Im((eps-1)/(eps+2)) must be positive")
        coeff = 72 * ZETA_5 * volume * K_B**5 / (np.pi**2 * C_LIGHT**3 * HBAR**4)
        return cls(coefficient=coeff * im_eps)

    def im_permittivity(self, volume):
        """Back out Im((eps - 1)/(eps + 2)) for a given volume."""
        coeff = 72 * ZETA_5 * volume * K_B**5 / (np.pi**2 * C_LIGHT**3 * HBAR**4)
        return self.coefficient / coeff


@dataclass(frozen=True)
class DipoleRotor:
    """Rigid rotor with a body-fixed in-plane electric dipole."""

    dipole: float                   # |p|, C m
    moment_of_inertia: float        # kg m^2
    beta0: float = 0.0              # initial dipole-field lag angle, rad

    def __post_init__(self):
        if self.dipole < 0 or self.moment_of_inertia <= 0:
            raise ValueError("dipole must be >= 0 and moment of inertia > 0")

    @classmethod
    def sphere(cls, dipole, radius, density, beta0=0.0):
        """Uniform sphere: I = (8/15) pi rho R^5."""
        inertia = 8.0 / 15.0 * np.pi * density * radius**5
        return cls(dipole=dipole, moment_of_inertia=inertia, beta0=beta0)


@dataclass(frozen=True)
class RotatingField:
    E_xy: float                     # in-plane field magnitude, V/m
    omega_drive: float              # rad/s
    direction: int = 1              # +1 / -1 rotation sense of the drive

    def __post_init__(self):
        if self.E_xy < 0:
            raise ValueError("E_xy must be >= 0")


def gas_damping_rate(particle, gas):
    """Rotational gas damping gamma_d = 40 eta' p R^2 / (3 m v), 1/s."""
    return (
        40.0 * gas.eta_prime * gas.pressure * particle.radius**2
        / (3.0 * particle.m * gas.mean_speed)
    )


def electric_torque(rotor, field, beta):
    """Drive torque |p| |E_xy| sin(beta) about z, N m."""
    return rotor.dipole * field.E_xy * np.sin(beta)


def max_rotation(rotor, field, particle, gas):
    """Terminal rotation rate |p| E_xy / (I gamma_d) at beta = pi/2, rad/s.

    Raises:
        ZeroDamping: gamma_d = 0 leaves the model unbounded.
    """
    gamma_d = gas_damping_rate(particle, gas)
    if gamma_d == 0:
        raise ZeroDamping("zero gas damping: no finite terminal rotation rate")
    return rotor.dipole * field.E_xy / (rotor.moment_of_inertia * gamma_d)


@dataclass(frozen=True)
class RotorTrajectory:
    t: np.ndarray
    angle: np.ndarray
    omega: np.ndarray
    drive_omega: float
    drive_direction: int


def rotor_trajectory(rotor, field, particle, gas, duration, dt,
                     angle0=0.0, omega0=0.0):
    """Integrate I d(omega)/dt = |p| E sin(psi - alpha) - I gamma_d omega.

    The drive field direction advances as psi(t) = direction * omega_drive * t;
    beta = psi - alpha is the dipole lag angle.  Classic RK4 on (alpha, omega).

    Raises:
        StepTooLarge: dt * omega_drive >= 0.1 rad.
    """
    if dt * field.omega_drive >= 0.1:
        raise StepTooLarge("require dt * omega_drive < 0.1 rad")
    gamma_d = gas_damping_rate(particle, gas)
    torque_scale = rotor.dipole * field.E_xy / rotor.moment_of_inertia
    sgn = field.direction
    omega_d = field.omega_drive

    n = int(np.ceil(duration / dt))
    t = np.arange(n + 1) * dt
    angle = np.empty(n + 1)
    omega = np.empty(n + 1)
    # start with the dipole lagging the field by beta0
    angle[0] = angle0
    omega[0] = omega0

    def deriv(a, w, tk):
        beta = sgn * omega_d * tk - a + rotor.beta0
        return w, torque_scale * np.sin(beta) - gamma_d * w

    a, w = angle[0], omega[0]
    for k in range(n):
        tk = t[k]
        ka1, kw1 = deriv(a, w, tk)
        ka2, kw2 = deriv(a + 0.5 * dt * ka1, w + 0.5 * dt * kw1, tk + 0.5 * dt)
        ka3, kw3 = deriv(a + 0.5 * dt * ka2, w + 0.5 * dt * kw2, tk + 0.5 * dt)
        ka4, kw4 = deriv(a + dt * ka3, w + dt * kw3, tk + dt)
        a += dt / 6.0 * (ka1 + 2 * ka2 + 2 * ka3 + ka4)
        w += dt / 6.0 * (kw1 + 2 * kw2 + 2 * kw3 + kw4)
        angle[k + 1], omega[k + 1] = a, w
    return RotorTrajectory(t=t, angle=angle, omega=omega,
                           drive_omega=omega_d, drive_direction=sgn)


def analyze_lock(traj, rotor, tail_fraction=0.25, tol=1e-3):
    """Steady-state lock diagnosis over the trailing part of a trajectory.

    Returns:
        dict with ``locked`` (mean angular velocity within ``tol`` of the
        drive), ``mean_omega``, and ``beta`` (mean lag angle over the tail,
        wrapped to (-pi, pi]; meaningful when locked).
    """
    n = len(traj.t)
    i0 = int(n * (1 - tail_fraction))
    mean_omega = float(np.mean(traj.omega[i0:]))
    target = traj.drive_direction * traj.drive_omega
    locked = abs(mean_omega - target) <= tol * abs(target)
    beta = (
        traj.drive_direction * traj.drive_omega * traj.t[i0:]
        - traj.angle[i0:] + rotor.beta0
    )
    beta_wrapped = np.angle(np.exp(1j * beta))
    return {
        "locked": bool(locked),
        "mean_omega": mean_omega,
        "beta": float(np.mean(beta_wrapped)),
    }


# -- internal temperature ---------------------------------------------------


def a_gas_coefficient(gas, radius):
    """Gas cooling coefficient kappa pi R^2 v (gamma'+1)/(gamma'-1) / (2 T0).

    Units m^3 s^-1 K^-1, so A_gas * p * (T - T0) is watts with p in Pa.
    """
    return (
        gas.kappa * np.pi * radius**2 * gas.mean_speed
        / (2.0 * gas.T0)
        * (gas.gamma_prime + 1.0) / (gas.gamma_prime - 1.0)
    )


def thermal_balance_solve(heating, gas, radius, bb, a_gas=None, t_max=5000.0):
    """Solve A_a = A_gas p (T - T0) + A_bb (T^5 - T0^5) for T > T0.

    The right side is strictly increasing in T, so the root is unique;
    bracketed Brent iteration on [T0, t_max].

    Args:
        a_gas: optional explicit gas coefficient (m^3 s^-1 K^-1), overriding
            the kinetic-theory value from ``gas`` and ``radius``.

    Raises:
        NoBracket: heating exceeds total cooling capacity at ``t_max``.
    """
    a_a = heating.absorbed_power()
    if a_gas is None:
        a_gas = a_gas_coefficient(gas, radius)
    a_bb = bb.coefficient if bb is not None else 0.0
    if a_gas * gas.pressure == 0 and a_bb == 0 and a_a > 0:
        raise NoBracket("no cooling channel against nonzero heating")
    if a_a == 0:
        return gas.T0

    def g(T):
        return (
            a_gas * gas.pressure * (T - gas.T0)
            + a_bb * (T**5 - gas.T0**5)
            - a_a
        )

    if g(t_max) < 0:
        raise NoBracket(f"no balance below {t_max} K")
    return float(brentq(g, gas.T0, t_max, xtol=1e-9, rtol=1e-14))


def calibrate_blackbody(heating, gas, radius, T_plateau, a_gas=None):
    """Back-solve the black-body coefficient from one plateau temperature.

    Uses the balance at the given gas pressure (usually deep enough in vacuum
    that the gas term is negligible).
    """
    a_a = heating.absorbed_power()
    if a_gas is None:
        a_gas = a_gas_coefficient(gas, radius)
    residual = a_a - a_gas * gas.pressure * (T_plateau - gas.T0)
    if residual <= 0:
        raise ValueError("gas cooling alone already balances the heating")
    return BlackBodyModel(coefficient=residual / (T_plateau**5 - gas.T0**5))


@dataclass(frozen=True)
class AbsorptionFitResult:
    eta_532: float            # 1/m, or None when unidentifiable
    eta_1064: float
    identifiable: dict        # per-wavelength flags
    residual_rms: float       # K


def absorption_fit(observations, gas_template, radius, bb, volume, a_gas=None):
    """Least-squares absorption coefficients from temperature observations.

    Args:
        observations: iterable of (I_532 W/m^2, I_1064 W/m^2, pressure Pa,
            T_measured K).
        gas_template: GasEnvironment whose T0/accommodation settings apply to
            every observation (pressure is taken per observation).

    Minimizes sum (T_model - T_measured)^2 over (eta_532, eta_1064), seeded
    by the linear inversion of the balance equation.  A wavelength whose
    intensity is zero throughout is flagged unidentifiable and pinned at 0.

    Raises:
        SingularDesign: intensity pairs are collinear (and both nonzero).
    """
    obs = [tuple(map(float, o)) for o in observations]
    if len(obs) < 1:
        raise ValueError("need at least one observation")
    i532 = np.array([o[0] for o in obs])
    i1064 = np.array([o[1] for o in obs])
    pressures = np.array([o[2] for o in obs])
    t_meas = np.array([o[3] for o in obs])

    active = [bool(i532.any()), bool(i1064.any())]
    design = np.stack([i532, i1064], axis=1) * volume
    active_cols = [j for j in range(2) if active[j]]
    if len(active_cols) == 0:
        raise ValueError("all intensities are zero")
    sub = design[:, active_cols]
    if np.linalg.matrix_rank(sub) < len(active_cols):
        raise SingularDesign("intensity pairs are collinear")

    # linear seed: required absorbed power per observation
    if a_gas is None:
        a_gas = a_gas_coefficient(gas_template, radius)
    a_req = a_gas * pressures * (t_meas - gas_template.T0) + bb.coefficient * (
        t_meas**5 - gas_template.T0**5
    )
    seed, *_ = np.linalg.lstsq(sub, a_req, rcond=None)
    seed = np.maximum(seed, 0.0)

    def model_temperatures(etas_active):
        etas = [0.0, 0.0]
        for val, j in zip(etas_active, active_cols):
            etas[j] = val
        out = np.empty(len(obs))
        for k, (ii532, ii1064, p, _) in enumerate(obs):
            heating = OpticalHeating(
                lines=(("532", ii532, etas[0]), ("1064", ii1064, etas[1])),
                particle_volume=volume,
            )
            gas = GasEnvironment(
                pressure=p,
                T0=gas_template.T0,
                mean_speed=gas_template.mean_speed,
                gamma_prime=gas_template.gamma_prime,
                kappa=gas_template.kappa,
                eta_prime=gas_template.eta_prime,
                molecular_mass=gas_template.molecular_mass,
            )
            out[k] = thermal_balance_solve(heating, gas, radius, bb, a_gas=a_gas)
        return out

    def residual(etas_active):
        return model_temperatures(etas_active) - t_meas

    res = least_squares(residual, seed, method="trf",
                        bounds=(0.0, np.inf), xtol=1e-12, ftol=1e-12)
    etas = [None, None]
    for val, j in zip(res.x, active_cols):
        etas[j] = float(val)
    return AbsorptionFitResult(
        eta_532=etas[0],
        eta_1064=etas[1],
        identifiable={"532": active[0], "1064": active[1]},
        residual_rms=float(np.sqrt(np.mean(res.fun**2))),
    )
