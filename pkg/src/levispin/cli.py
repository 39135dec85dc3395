"""Command-line front end.

Every subcommand reads a strict, unit-suffixed configuration (file and/or
repeated ``--set key=value`` flags; see :mod:`levispin.config`), runs one
analysis, and writes CSV/JSON artifacts into ``--out-dir``.  JSON outputs
embed the resolved configuration and the seed, so a record can be replayed;
identical invocations produce byte-identical files.

Exit codes: 0 success, 1 runtime/physics error, 2 usage or configuration
error.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import berry, langevin_cooling as lc, odmr, rabi, rotor_thermal as rt, trap
from ._fast import rk4_nv_batch
from .config import Field, load_raw_config, resolve
from .constants import GAMMA_E
from .errors import BadValue, ConfigError, LevispinError
from .nv_model import (
    FieldEnvironment,
    NVConfiguration,
    azimuthal_rate,
    eigenstate_columns,
    ms_index,
    rotation_transformation,
)

TWO_PI = 2 * np.pi

SUBCOMMANDS = [
    "trap-design", "odmr-sim", "berry-shift", "spin-dynamics", "rabi-sweep",
    "thermal", "rotor", "cooling-sim", "fit-odmr", "fit-psd",
]


def _write_csv(path, header, columns):
    """Full-precision CSV with LF endings; columns are equal-length arrays."""
    rows = zip(*columns)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])


def _write_json(path, record):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _record(subcommand, resolved_raw, seed, results):
    return {
        "format": "levispin-run-record",
        "version": 1,
        "subcommand": subcommand,
        "config": resolved_raw,
        "seed": seed,
        "results": results,
    }


def _hz(omega):
    return omega / TWO_PI


# -- schemas -----------------------------------------------------------------

TRAP_SCHEMA = {
    "inner_radius": Field("length", required=True),
    "outer_radius": Field("length", required=True),
    "drive_voltage": Field("voltage", required=True),
    "f_d": Field("frequency"),
    "omega_d": Field("angular_frequency"),
    "charge": Field("charge", required=True),
    "particle_radius": Field("length", required=True),
    "density": Field("density", default="3500 kg/m^3"),
    "profile_points": Field("int", default=2001),
    "profile_max_height_factor": Field("float", default=8.0),
}

_NV_COMMON = {
    "zero_field_splitting": Field("angular_frequency", default="2.87 GHz"),
    "gamma_e": Field("gyromagnetic", default="28.024 GHz/T"),
}

ODMR_SIM_SCHEMA = {
    **_NV_COMMON,
    "B_static": Field("field", default="0 G"),
    "rotation_frequency": Field("angular_frequency", default="0 Hz"),
    "intrinsic_fwhm": Field("angular_frequency", required=True),
    "contrast_per_dip": Field("float", default=0.04),
    "strain": Field("angular_frequency", default="0 MHz"),
    "drive_component": Field("str", default="longitudinal",
                             choices=["longitudinal", "transverse"]),
    "ensemble": Field("str", default="identity",
                      choices=["identity", "axis_aligned"]),
    "thetas": Field("angle", many=True),
    "freq_min": Field("angular_frequency", required=True),
    "freq_max": Field("angular_frequency", required=True),
    "freq_points": Field("int", default=4001),
}

BERRY_SHIFT_SCHEMA = {
    **_NV_COMMON,
    "theta": Field("angle", required=True),
    "B_static": Field("field", default="0 G"),
    "target_ms": Field("int", default=1),
    "drive_component": Field("str", default="longitudinal",
                             choices=["longitudinal", "transverse"]),
    "rotation_min": Field("angular_frequency", required=True),
    "rotation_max": Field("angular_frequency", required=True),
    "rotation_points": Field("int", default=50),
}

SPIN_DYNAMICS_SCHEMA = {
    **_NV_COMMON,
    "theta": Field("angle", required=True),
    "phi0": Field("angle", default="0 deg"),
    "B_static": Field("field", default="0 G"),
    "rotation_frequency": Field("angular_frequency", default="0 Hz"),
    "duration": Field("time", required=True),
    "initial_ms": Field("int", default=0),
    "mw_frequency": Field("angular_frequency"),
    "mw_amplitude": Field("field", default="0 T"),
    "mw_tilt": Field("angle", default="8.5 deg"),
    "samples": Field("int", default=501),
    "steps_per_rad": Field("float", default=12.0),
}

RABI_SWEEP_SCHEMA = {
    **_NV_COMMON,
    "theta": Field("angle", required=True),
    "mw_tilt": Field("angle", default="8.5 deg"),
    "phi_points": Field("int", default=24),
    "reference_rabi": Field("angular_frequency"),
    "reference_phi": Field("angle", default="90 deg"),
    "simulate": Field("bool", default=False),
    "B_static": Field("field", default="0 G"),
    "rotation_frequency": Field("angular_frequency", default="100 kHz"),
    "mw_amplitude": Field("field", default="0 T"),
    "mw_duration": Field("time", default="0.25 us"),
    "trace_phases": Field("angle", many=True, default="90 deg, 180 deg"),
    "target_ms": Field("int", default=1),
}

THERMAL_SCHEMA = {
    "particle_radius": Field("length", required=True),
    "T0": Field("temperature", default="298 K"),
    "I_532": Field("intensity", default="0 W/mm^2"),
    "I_1064": Field("intensity", default="0 W/mm^2"),
    "eta_532": Field("absorption", default="0 cm^-1"),
    "eta_1064": Field("absorption", default="0 cm^-1"),
    "kappa": Field("float", default=1.0),
    "gamma_prime": Field("float", default=1.4),
    "a_gas": Field("gas_coefficient"),
    "im_epsilon": Field("float"),
    "plateau_T": Field("temperature"),
    "plateau_pressure": Field("pressure", default="1e-7 Torr"),
    "pressure": Field("pressure"),
    "pressure_min": Field("pressure"),
    "pressure_max": Field("pressure"),
    "pressure_points": Field("int", default=25),
}

ROTOR_SCHEMA = {
    "dipole": Field("dipole", required=True),
    "particle_radius": Field("length", required=True),
    "density": Field("density", default="3500 kg/m^3"),
    "pressure": Field("pressure", required=True),
    "T0": Field("temperature", default="298 K"),
    "eta_prime": Field("float", default=1.0),
    "E_field": Field("efield", required=True),
    "drive_frequency": Field("angular_frequency", required=True),
    "drive_direction": Field("int", default=1),
    "duration": Field("time", required=True),
    "dt": Field("time", required=True),
    "initial_omega_fraction": Field("float", default=0.0),
    "beta0": Field("angle", default="0 deg"),
}

COOLING_SCHEMA = {
    "particle_radius": Field("length", required=True),
    "density": Field("density", default="3500 kg/m^3"),
    "pressure": Field("pressure", required=True),
    "T0": Field("temperature", default="298 K"),
    "bath_T": Field("temperature", default="298 K"),
    "f_x": Field("frequency", default="1.2 kHz"),
    "f_y": Field("frequency", default="1.4 kHz"),
    "f_z": Field("frequency", default="1.65 kHz"),
    "damping": Field("rate"),
    "duration_damping_times": Field("float", default=200.0),
    "dt_periods": Field("float", default=0.02),
    "gain": Field("rate"),
    "feedback_mode": Field("str", default="velocity",
                           choices=["velocity", "delayed_position"]),
    "bandpass_low": Field("angular_frequency"),
    "bandpass_high": Field("angular_frequency"),
    "emit_timeseries": Field("bool", default=False),
    "psd_segments": Field("int", default=8),
}

FIT_ODMR_SCHEMA = {
    "input": Field("str", required=True),
    "n_dips": Field("int", required=True),
    "center_guesses": Field("angular_frequency", many=True),
    "width_guess": Field("angular_frequency"),
}

FIT_PSD_SCHEMA = {
    "input": Field("str", required=True),
    "mass": Field("mass"),
    "particle_radius": Field("length"),
    "density": Field("density", default="3500 kg/m^3"),
    "pressure": Field("pressure"),
    "T0": Field("temperature", default="298 K"),
}


# -- handlers ----------------------------------------------------------------


def _cmd_trap_design(values, raw, seed, out_dir):
    if (values["f_d"] is None) == (values["omega_d"] is None):
        raise BadValue("f_d", raw.get("f_d"),
                       "give exactly one of f_d (cyclic) or omega_d (angular)")
    f_d = values["f_d"] if values["f_d"] is not None else values["omega_d"] / TWO_PI
    geom = trap.RingTrapGeometry(a=values["inner_radius"],
                                 b=values["outer_radius"])
    drive = trap.TrapDrive(V_d=values["drive_voltage"], f_d=f_d)
    particle = trap.ChargedParticle(Q=values["charge"],
                                    radius=values["particle_radius"],
                                    density=values["density"])
    ch = trap.characterize(geom, drive, particle)
    z = np.linspace(ch.z0 / 4,
                    values["profile_max_height_factor"] * ch.z0,
                    values["profile_points"])
    profile = trap.pseudopotential_profile(geom, drive, particle, z)
    harmonic = trap.pseudopotential_profile(geom, drive, particle, z,
                                            harmonic=True)
    _write_csv(out_dir / "trap_design_profile.csv",
               ["z_m", "potential_ev", "harmonic_ev"], [z, profile, harmonic])
    results = {
        "z0_m": ch.z0,
        "omega_z_rad_per_s": ch.omega_z,
        "f_z_hz": ch.omega_z / TWO_PI,
        "q_z": ch.q_z,
        "depth_ev": ch.depth,
        "stable": ch.stable,
        "stability_margin": ch.margin,
        "mass_kg": particle.m,
    }
    _write_json(out_dir / "trap_design.json",
                _record("trap-design", raw, seed, results))
    print(f"trap-design: z0 = {ch.z0 * 1e6:.1f} um, f_z = "
          f"{ch.omega_z / TWO_PI:.1f} Hz, q_z = {ch.q_z:.3f}, "
          f"depth = {ch.depth:.0f} eV")
    return ["trap_design.json", "trap_design_profile.csv"]


def _make_env(values, mw_frequency=0.0, mw_amplitude=0.0):
    return FieldEnvironment(
        B_static=values.get("B_static", 0.0),
        omega_r=values.get("rotation_frequency", 0.0) or 0.0,
        mw_amplitude=mw_amplitude,
        mw_frequency=mw_frequency,
        mw_tilt=values.get("mw_tilt") or np.radians(8.5),
    )


def _cmd_odmr_sim(values, raw, seed, out_dir):
    env = _make_env(values)
    line = odmr.LineShape(intrinsic_fwhm=values["intrinsic_fwhm"],
                          contrast_per_dip=values["contrast_per_dip"],
                          strain_E=values["strain"])
    if values["thetas"] is not None:
        orientations = np.asarray(values["thetas"])
    elif values["ensemble"] == "axis_aligned":
        orientations = odmr.OrientationEnsemble.axis_aligned()
    else:
        orientations = odmr.OrientationEnsemble.identity()
    grid = np.linspace(values["freq_min"], values["freq_max"],
                       values["freq_points"])
    spectrum = odmr.synth_spectrum(
        orientations, line, env, grid,
        drive_component=values["drive_component"],
        D=values["zero_field_splitting"], gamma_e=values["gamma_e"],
    )
    odmr.write_spectrum_csv(out_dir / "odmr_spectrum.csv", spectrum)
    thetas = (odmr.tetrahedral_thetas(orientations)
              if isinstance(orientations, odmr.OrientationEnsemble)
              else orientations)
    centers = odmr.dip_centers(thetas, env, values["drive_component"],
                               values["strain"],
                               values["zero_field_splitting"],
                               values["gamma_e"])
    results = {
        "dip_centers_hz": [_hz(c) for c in centers],
        "fwhm_hz": _hz(odmr.fwhm(spectrum)),
        "orientation_thetas_deg": [float(np.degrees(t)) for t in thetas],
    }
    _write_json(out_dir / "odmr_sim.json",
                _record("odmr-sim", raw, seed, results))
    print(f"odmr-sim: {len(centers)} dips, FWHM = "
          f"{results['fwhm_hz'] / 1e6:.2f} MHz")
    return ["odmr_sim.json", "odmr_spectrum.csv"]


def _cmd_berry_shift(values, raw, seed, out_dir):
    cfg = NVConfiguration(theta=values["theta"],
                          D=values["zero_field_splitting"],
                          gamma_e=values["gamma_e"])
    rotations = np.linspace(values["rotation_min"], values["rotation_max"],
                            values["rotation_points"])
    resonances = []
    for om in rotations:
        env = FieldEnvironment(B_static=values["B_static"], omega_r=om)
        q = berry.ResonanceQuery(values["target_ms"],
                                 values["drive_component"], cfg, env)
        resonances.append(berry.resonance_frequency(q))
    resonances = np.array(resonances)
    _write_csv(out_dir / "berry_shift.csv",
               ["rotation_hz", "resonance_hz"],
               [rotations / TWO_PI, resonances / TWO_PI])
    results = {
        "resonance_at_min_hz": _hz(resonances[0]),
        "resonance_at_max_hz": _hz(resonances[-1]),
        "shift_slope_per_unit_rotation": float(
            (resonances[-1] - resonances[0]) / (rotations[-1] - rotations[0])
        ) if rotations[-1] != rotations[0] else 0.0,
    }
    _write_json(out_dir / "berry_shift.json",
                _record("berry-shift", raw, seed, results))
    print(f"berry-shift: resonance spans "
          f"[{results['resonance_at_min_hz'] / 1e9:.6f}, "
          f"{results['resonance_at_max_hz'] / 1e9:.6f}] GHz")
    return ["berry_shift.json", "berry_shift.csv"]


def _cmd_spin_dynamics(values, raw, seed, out_dir):
    cfg = NVConfiguration(theta=values["theta"], phi0=values["phi0"],
                          D=values["zero_field_splitting"],
                          gamma_e=values["gamma_e"])
    env = _make_env(values, mw_frequency=values["mw_frequency"] or 0.0,
                    mw_amplitude=values["mw_amplitude"])
    om_phi = azimuthal_rate(env.omega_r)
    ry = rotation_transformation(cfg.theta, 0.0)
    from .nv_model import S_Z2
    from .spin_core import S_Z
    a_body = ry @ (cfg.D * S_Z2) @ ry.conj().T
    shift = (cfg.D + cfg.gamma_e * env.B_static) / 2.0
    hs = cfg.gamma_e * env.B_static * S_Z - shift * np.eye(3)
    w = berry.drive_operator(env.mw_tilt)
    amp = cfg.gamma_e * env.mw_amplitude
    lam = max(abs(cfg.D + cfg.gamma_e * env.B_static - shift), shift) + amp
    dt = 1.0 / (values["steps_per_rad"] * lam)
    n_samples = values["samples"]
    stride = max(1, int(np.ceil(values["duration"] / dt / n_samples)))
    n_steps = int(np.ceil(values["duration"] / dt / stride)) * stride
    dt = values["duration"] / n_steps
    r0 = rotation_transformation(cfg.theta, cfg.phi0)
    out = rk4_nv_batch(
        a=a_body[None], hs=hs[None], w=w[None],
        phi0=np.array([cfg.phi0]), omphi=np.array([om_phi]),
        amp=np.array([amp]), omega=np.array([env.mw_frequency]),
        psi0=r0[:, ms_index(values["initial_ms"])][None],
        dt=dt, n_steps=n_steps, stride=stride,
    )[0]
    t = np.arange(out.shape[0]) * (stride * dt)
    phis = cfg.phi0 + om_phi * t
    pops = {}
    for ms in (1, 0, -1):
        states = eigenstate_columns(ms, cfg.theta, phis)
        pops[ms] = np.abs(np.einsum("ki,ki->k", states.conj(), out)) ** 2
    _write_csv(out_dir / "spin_dynamics.csv",
               ["t_s", "p_plus", "p_zero", "p_minus"],
               [t, pops[1], pops[0], pops[-1]])
    norm_drift = float(np.abs(np.linalg.norm(out, axis=1) - 1.0).max())
    results = {
        "final_populations": {"plus": float(pops[1][-1]),
                              "zero": float(pops[0][-1]),
                              "minus": float(pops[-1][-1])},
        "max_norm_drift": norm_drift,
        "steps": int(n_steps),
    }
    _write_json(out_dir / "spin_dynamics.json",
                _record("spin-dynamics", raw, seed, results))
    print(f"spin-dynamics: {n_steps} steps, final P(+1) = "
          f"{results['final_populations']['plus']:.4f}")
    return ["spin_dynamics.json", "spin_dynamics.csv"]


def _cmd_rabi_sweep(values, raw, seed, out_dir):
    geom = rabi.RabiGeometry(theta=values["theta"],
                             theta_prime=values["mw_tilt"])
    phis = np.linspace(0.0, TWO_PI, values["phi_points"], endpoint=False)
    factors = rabi.rabi_factor(geom, phis)
    outputs = []
    if values["reference_rabi"] is not None:
        curve = rabi.phase_sweep(geom, phis,
                                 reference_omega=values["reference_rabi"],
                                 reference_phi=values["reference_phi"])
        _write_csv(out_dir / "rabi_sweep.csv",
                   ["phi_rad", "rabi_factor", "omega_rabi_hz"],
                   [phis, factors, curve / TWO_PI])
    else:
        _write_csv(out_dir / "rabi_sweep.csv",
                   ["phi_rad", "rabi_factor"], [phis, factors])
    outputs.append("rabi_sweep.csv")

    results = {
        "argmin_phi_rad": float(phis[np.argmin(factors)]),
        "argmax_phi_rad": float(phis[np.argmax(factors)]),
        "factor_min": float(factors.min()),
        "factor_max": float(factors.max()),
    }
    if values["simulate"]:
        if values["mw_amplitude"] <= 0:
            raise BadValue("mw_amplitude", raw.get("mw_amplitude"),
                           "simulate = true requires a positive mw_amplitude")
        traces = {}
        for i, phi in enumerate(values["trace_phases"]):
            cfg = NVConfiguration(theta=values["theta"],
                                  D=values["zero_field_splitting"],
                                  gamma_e=values["gamma_e"])
            env_probe = FieldEnvironment(
                B_static=values["B_static"],
                omega_r=values["rotation_frequency"],
                mw_amplitude=values["mw_amplitude"],
                mw_frequency=0.0, mw_tilt=values["mw_tilt"])
            q = berry.ResonanceQuery(values["target_ms"], "longitudinal",
                                     cfg, env_probe)
            env = FieldEnvironment(
                B_static=values["B_static"],
                omega_r=values["rotation_frequency"],
                mw_amplitude=values["mw_amplitude"],
                mw_frequency=berry.resonance_frequency(q),
                mw_tilt=values["mw_tilt"])
            period = TWO_PI / abs(env.omega_r) if env.omega_r else np.inf
            seq = rabi.PulseSequence(mw_start_phase=phi,
                                     mw_duration=values["mw_duration"],
                                     rotation_period=period)
            trace = rabi.simulate_rabi(cfg, env, seq,
                                       target_ms=values["target_ms"])
            name = f"rabi_trace_{i}.csv"
            _write_csv(out_dir / name, ["pulse_s", "population"],
                       [trace.pulse_lengths, trace.population])
            outputs.append(name)
            traces[f"{np.degrees(phi):.1f}_deg"] = {
                "omega_fit_hz": _hz(trace.omega_fit),
                "file": name,
            }
        results["traces"] = traces
    _write_json(out_dir / "rabi_sweep.json",
                _record("rabi-sweep", raw, seed, results))
    outputs.insert(0, "rabi_sweep.json")
    print(f"rabi-sweep: factor range [{results['factor_min']:.4f}, "
          f"{results['factor_max']:.4f}], argmin at "
          f"{np.degrees(results['argmin_phi_rad']):.0f} deg")
    return outputs


def _thermal_parts(values):
    radius = values["particle_radius"]
    volume = 4.0 / 3.0 * np.pi * radius**3
    heating = rt.OpticalHeating(
        lines=(("532", values["I_532"], values["eta_532"]),
               ("1064", values["I_1064"], values["eta_1064"])),
        particle_volume=volume)
    def gas_at(p):
        return rt.GasEnvironment(pressure=p, T0=values["T0"],
                                 gamma_prime=values["gamma_prime"],
                                 kappa=values["kappa"])
    if values["im_epsilon"] is not None:
        bb = rt.BlackBodyModel.from_permittivity(volume, values["im_epsilon"])
    elif values["plateau_T"] is not None:
        bb = rt.calibrate_blackbody(heating, gas_at(values["plateau_pressure"]),
                                    radius, values["plateau_T"],
                                    a_gas=values["a_gas"])
    else:
        bb = rt.BlackBodyModel(coefficient=0.0)
    return heating, gas_at, bb, radius, volume


def _cmd_thermal(values, raw, seed, out_dir):
    heating, gas_at, bb, radius, volume = _thermal_parts(values)
    outputs = ["thermal.json"]
    results = {
        "absorbed_power_w": heating.absorbed_power(),
        "blackbody_coefficient_w_per_k5": bb.coefficient,
        "im_epsilon_effective": (bb.im_permittivity(volume)
                                 if bb.coefficient > 0 else 0.0),
    }
    if values["pressure"] is not None:
        t_solved = rt.thermal_balance_solve(heating, gas_at(values["pressure"]),
                                            radius, bb, a_gas=values["a_gas"])
        results["temperature_k"] = t_solved
        print(f"thermal: T = {t_solved:.2f} K at "
              f"{values['pressure']:.3e} Pa")
    if values["pressure_min"] is not None and values["pressure_max"] is not None:
        ps = np.logspace(np.log10(values["pressure_min"]),
                         np.log10(values["pressure_max"]),
                         values["pressure_points"])
        ts = np.array([
            rt.thermal_balance_solve(heating, gas_at(p), radius, bb,
                                     a_gas=values["a_gas"]) for p in ps
        ])
        _write_csv(out_dir / "thermal_curve.csv",
                   ["pressure_pa", "pressure_torr", "temperature_k"],
                   [ps, ps / 133.322, ts])
        outputs.append("thermal_curve.csv")
        results["curve"] = {"pressure_min_pa": float(ps[0]),
                            "pressure_max_pa": float(ps[-1]),
                            "t_min_k": float(ts.min()),
                            "t_max_k": float(ts.max())}
        if "temperature_k" not in results:
            print(f"thermal: curve over [{ps[0]:.3e}, {ps[-1]:.3e}] Pa, "
                  f"T in [{ts.min():.1f}, {ts.max():.1f}] K")
    _write_json(out_dir / "thermal.json",
                _record("thermal", raw, seed, results))
    return outputs


def _cmd_rotor(values, raw, seed, out_dir):
    particle = trap.ChargedParticle(Q=0.0, radius=values["particle_radius"],
                                    density=values["density"])
    gas = rt.GasEnvironment(pressure=values["pressure"], T0=values["T0"],
                            eta_prime=values["eta_prime"])
    rotor = rt.DipoleRotor.sphere(dipole=values["dipole"],
                                  radius=values["particle_radius"],
                                  density=values["density"],
                                  beta0=values["beta0"])
    field = rt.RotatingField(E_xy=values["E_field"],
                             omega_drive=abs(values["drive_frequency"]),
                             direction=values["drive_direction"])
    gamma_d = rt.gas_damping_rate(particle, gas)
    omega0 = (values["initial_omega_fraction"] * field.direction
              * field.omega_drive)
    traj = rt.rotor_trajectory(rotor, field, particle, gas,
                               duration=values["duration"], dt=values["dt"],
                               omega0=omega0)
    lock = rt.analyze_lock(traj, rotor)
    _write_csv(out_dir / "rotor_trajectory.csv",
               ["t_s", "angle_rad", "omega_rad_per_s"],
               [traj.t, traj.angle, traj.omega])
    results = {
        "gamma_d_per_s": gamma_d,
        "locked": lock["locked"],
        "mean_omega_rad_per_s": lock["mean_omega"],
        "beta_deg": float(np.degrees(lock["beta"])),
        "max_rotation_rad_per_s": rt.max_rotation(rotor, field, particle, gas),
        "lock_threshold_field_v_per_m": (
            rotor.moment_of_inertia * gamma_d * field.omega_drive
            / rotor.dipole if rotor.dipole > 0 else None),
    }
    _write_json(out_dir / "rotor.json", _record("rotor", raw, seed, results))
    state = "locked" if lock["locked"] else "unlocked"
    print(f"rotor: {state}, mean omega = {lock['mean_omega']:.4g} rad/s, "
          f"beta = {results['beta_deg']:.2f} deg")
    return ["rotor.json", "rotor_trajectory.csv"]


def _cmd_cooling_sim(values, raw, seed, out_dir):
    if seed is None:
        raise BadValue("seed", None,
                       "cooling-sim requires --seed for reproducibility")
    mass = (4.0 / 3.0 * np.pi * values["particle_radius"]**3
            * values["density"])
    gas = rt.GasEnvironment(pressure=values["pressure"], T0=values["T0"])
    gamma = values["damping"]
    if gamma is None:
        gamma = lc.translational_damping_rate(values["particle_radius"],
                                              values["density"], gas)
    modes = [
        lc.HarmonicMode(axis=ax, omega0=TWO_PI * values[f"f_{ax}"], mass=mass,
                        gamma_t=gamma, bath_T=values["bath_T"])
        for ax in ("x", "y", "z")
    ]
    feedback = None
    if values["gain"] is not None:
        bandpass = None
        if values["bandpass_low"] is not None and values["bandpass_high"] is not None:
            bandpass = (values["bandpass_low"], values["bandpass_high"])
        feedback = lc.FeedbackConfig(gain=values["gain"],
                                     mode=values["feedback_mode"],
                                     bandpass=bandpass)
    slowest = min(m.omega0 for m in modes)
    fastest = max(m.omega0 for m in modes)
    dt = values["dt_periods"] * TWO_PI / fastest
    duration = values["duration_damping_times"] / gamma
    series = lc.simulate_com(modes, duration=duration, dt=dt, seed=seed,
                             feedback=feedback)
    outputs = ["cooling_fits.json"]
    fits = {}
    for mode in modes:
        ts = series[mode.axis]
        n = len(ts.samples)
        # segments must be long against 1/gamma to resolve the linewidth
        seg = n // max(values["psd_segments"], 4)
        estimate = lc.psd(ts, segment_length=seg)
        name = f"cooling_psd_{mode.axis}.csv"
        _write_csv(out_dir / name, ["freq_hz", "psd_m2_per_hz"],
                   [estimate.freq, estimate.values])
        outputs.append(name)
        entry = {
            "variance_m2": float(ts.samples.var()),
            "psd_file": name,
            "segments": estimate.segment_count,
        }
        try:
            fit = lc.fit_lorentzian_psd(estimate, mass)
            entry.update({
                "f0_hz": _hz(fit.omega0_fit),
                "gamma_per_s": fit.gamma_fit,
                "T_eff_k": fit.T_eff,
                "noise_floor_m2_per_hz": fit.noise_floor,
                "uncertainty": fit.uncertainty,
            })
        except LevispinError as exc:
            entry["fit_error"] = f"{type(exc).__name__}: {exc}"
        fits[mode.axis] = entry
        if values["emit_timeseries"]:
            tname = f"cooling_timeseries_{mode.axis}.csv"
            t = np.arange(n) * ts.dt
            _write_csv(out_dir / tname, ["t_s", "x_m"], [t, ts.samples])
            outputs.append(tname)
    results = {"mass_kg": mass, "gamma_per_s": gamma, "fits": fits,
               "dt_s": dt, "duration_s": duration}
    _write_json(out_dir / "cooling_fits.json",
                _record("cooling-sim", raw, seed, results))
    teffs = ", ".join(
        f"{ax}: {fits[ax].get('T_eff_k', float('nan')):.3g} K"
        for ax in ("x", "y", "z"))
    print(f"cooling-sim: T_eff {teffs}")
    return outputs


def _cmd_fit_odmr(values, raw, seed, out_dir):
    spectrum = odmr.read_spectrum_csv(values["input"])
    guess = None
    if values["center_guesses"] is not None:
        width = values["width_guess"]
        if width is None:
            width = (spectrum.freq[-1] - spectrum.freq[0]) / (
                4 * values["n_dips"])
        amp = float(spectrum.contrast.max())
        guess = []
        for c in values["center_guesses"]:
            guess.extend([c, width, amp / 2])
    fit = odmr.fit_dips(spectrum, values["n_dips"], initial_guess=guess)
    results = odmr.fit_to_record(fit)
    _write_json(out_dir / "odmr_fit.json",
                _record("fit-odmr", raw, seed, results))
    centers = ", ".join(f"{d['center_hz'] / 1e9:.6f}" for d in results["dips"])
    print(f"fit-odmr: {values['n_dips']} dips at [{centers}] GHz, "
          f"rms = {fit.residual_rms:.3e}")
    return ["odmr_fit.json"]


def _cmd_fit_psd(values, raw, seed, out_dir):
    with open(values["input"], newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header[:2]] != ["freq_hz", "psd_m2_per_hz"]:
            raise BadValue("input", values["input"],
                           "PSD CSV must start with 'freq_hz, psd_m2_per_hz'")
        rows = [(float(r[0]), float(r[1])) for r in reader]
    estimate = lc.PSDEstimate(freq=np.array([r[0] for r in rows]),
                              values=np.array([r[1] for r in rows]),
                              segment_count=0, window="unknown")
    mass = values["mass"]
    if mass is None:
        if values["particle_radius"] is None:
            raise BadValue("mass", None,
                           "give mass, or particle_radius plus density")
        mass = (4.0 / 3.0 * np.pi * values["particle_radius"]**3
                * values["density"])
    fit = lc.fit_lorentzian_psd(estimate, mass)
    results = {
        "f0_hz": _hz(fit.omega0_fit),
        "gamma_per_s": fit.gamma_fit,
        "T_eff_k": fit.T_eff,
        "noise_floor_m2_per_hz": fit.noise_floor,
        "uncertainty": fit.uncertainty,
        "T_area_k": lc.area_temperature(estimate, mass, fit.omega0_fit,
                                        fit.noise_floor),
    }
    if values["pressure"] is not None:
        gas = rt.GasEnvironment(pressure=values["pressure"], T0=values["T0"])
        results["inferred_radius_m"] = lc.infer_radius(fit, gas,
                                                       values["density"])
    _write_json(out_dir / "psd_fit.json",
                _record("fit-psd", raw, seed, results))
    print(f"fit-psd: f0 = {results['f0_hz']:.2f} Hz, gamma = "
          f"{fit.gamma_fit:.3g} 1/s, T_eff = {fit.T_eff:.3g} K")
    return ["psd_fit.json"]


HANDLERS = {
    "trap-design": (_cmd_trap_design, TRAP_SCHEMA),
    "odmr-sim": (_cmd_odmr_sim, ODMR_SIM_SCHEMA),
    "berry-shift": (_cmd_berry_shift, BERRY_SHIFT_SCHEMA),
    "spin-dynamics": (_cmd_spin_dynamics, SPIN_DYNAMICS_SCHEMA),
    "rabi-sweep": (_cmd_rabi_sweep, RABI_SWEEP_SCHEMA),
    "thermal": (_cmd_thermal, THERMAL_SCHEMA),
    "rotor": (_cmd_rotor, ROTOR_SCHEMA),
    "cooling-sim": (_cmd_cooling_sim, COOLING_SCHEMA),
    "fit-odmr": (_cmd_fit_odmr, FIT_ODMR_SCHEMA),
    "fit-psd": (_cmd_fit_psd, FIT_PSD_SCHEMA),
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="levispin",
        description="Spin-mechanics toolkit for rotating levitated "
                    "nanodiamonds with NV centers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} analysis")
        p.add_argument("--config", type=str, default=None,
                       help="key-value or JSON configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override or supply a single configuration entry")
        p.add_argument("--out-dir", type=str, default=".",
                       help="directory for output artifacts")
        p.add_argument("--seed", type=int, default=None,
                       help="seed for stochastic subcommands; recorded in "
                            "every JSON output")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handler, schema = HANDLERS[args.command]
    try:
        raw = load_raw_config(path=args.config, overrides=args.set)
        values, resolved_raw = resolve(raw, schema)
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        handler(values, resolved_raw, args.seed, out_dir)
    except ConfigError as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 2
    except LevispinError as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
