import csv
import json
from pathlib import Path

import numpy as np
import pytest

from levispin import cli
from levispin.config import Field, load_raw_config, resolve
from levispin.errors import BadValue, MissingUnit, UnknownKey

TRAP_CFG = """
# reference ring trap
inner_radius = "270 um"
outer_radius = "450 um"
drive_voltage = "300 V"
f_d = "16 kHz"
charge = "2000 e"
particle_radius = "264 nm"
density = "3500 kg/m^3"
"""


def run_cli(args):
    return cli.main(args)


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


class TestConfigParsing:
    def test_gauss_to_tesla(self):
        values, _ = resolve({"b": "100 G"}, {"b": Field("field")})
        assert values["b"] == pytest.approx(0.01, rel=1e-12)

    def test_torr_to_pascal(self):
        values, _ = resolve({"p": "6.9e-6 Torr"}, {"p": Field("pressure")})
        assert values["p"] == pytest.approx(9.199218e-4, rel=1e-6)

    def test_intensity_and_absorption(self):
        schema = {"i": Field("intensity"), "a": Field("absorption")}
        values, _ = resolve({"i": "1 W/mm^2", "a": "1 cm^-1"}, schema)
        assert values["i"] == 1e6
        assert values["a"] == 100.0

    def test_degrees_to_radians(self):
        values, _ = resolve({"t": "90 deg"}, {"t": Field("angle")})
        assert values["t"] == pytest.approx(np.pi / 2, rel=1e-12)

    def test_spin_frequency_angular(self):
        values, _ = resolve({"d": "2.87 GHz"},
                            {"d": Field("angular_frequency")})
        assert values["d"] == pytest.approx(2 * np.pi * 2.87e9, rel=1e-12)

    def test_missing_unit(self):
        with pytest.raises(MissingUnit) as err:
            resolve({"b": "100"}, {"b": Field("field")})
        assert "b" in str(err.value)

    def test_unknown_key(self):
        with pytest.raises(UnknownKey) as err:
            resolve({"nope": "1 G"}, {"b": Field("field")})
        assert "nope" in str(err.value)

    def test_bad_unit(self):
        with pytest.raises(BadValue) as err:
            resolve({"b": "100 Torr"}, {"b": Field("field")})
        assert "b" in str(err.value)

    def test_required_missing(self):
        with pytest.raises(BadValue):
            resolve({}, {"b": Field("field", required=True)})

    def test_kv_and_json_equivalent(self, tmp_path):
        kv = tmp_path / "a.cfg"
        kv.write_text('b = "100 G"\nn = 5\nflag = true\n')
        js = tmp_path / "a.json"
        js.write_text('{"b": "100 G", "n": 5, "flag": true}')
        schema = {"b": Field("field"), "n": Field("int"),
                  "flag": Field("bool")}
        v1, _ = resolve(load_raw_config(path=str(kv)), schema)
        v2, _ = resolve(load_raw_config(path=str(js)), schema)
        assert v1 == v2

    def test_set_overrides_file(self, tmp_path):
        kv = tmp_path / "a.cfg"
        kv.write_text('b = "100 G"\n')
        raw = load_raw_config(path=str(kv), overrides=['b="50 G"'])
        values, _ = resolve(raw, {"b": Field("field")})
        assert values["b"] == pytest.approx(5e-3)

    def test_quantity_list(self):
        values, _ = resolve({"angles": "0 deg, 90 deg"},
                            {"angles": Field("angle", many=True)})
        assert values["angles"] == pytest.approx([0.0, np.pi / 2])

    def test_resolved_raw_roundtrip(self):
        schema = {"b": Field("field", default="100 G"),
                  "n": Field("int", default=3)}
        values, resolved_raw = resolve({}, schema)
        values2, _ = resolve(resolved_raw, schema)
        assert values == values2


class TestTrapDesignCommand:
    def test_golden_values_and_artifacts(self, tmp_path):
        cfg = tmp_path / "trap.cfg"
        cfg.write_text(TRAP_CFG)
        out = tmp_path / "out"
        assert run_cli(["trap-design", "--config", str(cfg),
                        "--out-dir", str(out)]) == 0
        record = read_json(out / "trap_design.json")
        res = record["results"]
        assert abs(res["z0_m"] - 245e-6) < 1e-6
        assert abs(res["q_z"] - 0.29) < 0.01
        assert abs(res["f_z_hz"] - 1641.5) < 33.0
        assert abs(res["depth_ev"] - 420.0) < 21.0
        assert res["stable"] is True
        assert (out / "trap_design_profile.csv").exists()

    def test_byte_identical_reruns(self, tmp_path):
        cfg = tmp_path / "trap.cfg"
        cfg.write_text(TRAP_CFG)
        outs = []
        for name in ("o1", "o2"):
            out = tmp_path / name
            assert run_cli(["trap-design", "--config", str(cfg),
                            "--out-dir", str(out)]) == 0
            outs.append(out)
        for fname in ("trap_design.json", "trap_design_profile.csv"):
            assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()

    def test_csv_format(self, tmp_path):
        cfg = tmp_path / "trap.cfg"
        cfg.write_text(TRAP_CFG)
        out = tmp_path / "out"
        run_cli(["trap-design", "--config", str(cfg), "--out-dir", str(out)])
        raw = (out / "trap_design_profile.csv").read_bytes()
        assert b"\r" not in raw  # LF endings
        lines = raw.decode().splitlines()
        assert lines[0] == "z_m,potential_ev,harmonic_ev"
        z = float(lines[1].split(",")[0])
        assert repr(z) == lines[1].split(",")[0]  # full-precision round trip

    def test_drive_convention_exclusive(self, tmp_path):
        cfg = tmp_path / "trap.cfg"
        cfg.write_text(TRAP_CFG.replace('f_d = "16 kHz"\n', ""))
        assert run_cli(["trap-design", "--config", str(cfg)]) == 2
        cfg2 = tmp_path / "trap2.cfg"
        cfg2.write_text(TRAP_CFG + 'omega_d = "1.0053e5 rad/s"\n')
        assert run_cli(["trap-design", "--config", str(cfg2)]) == 2

    def test_angular_drive_convention(self, tmp_path):
        cfg = tmp_path / "trap.cfg"
        cfg.write_text(TRAP_CFG.replace('f_d = "16 kHz"',
                                        'omega_d = "100530.96 rad/s"'))
        out = tmp_path / "out"
        assert run_cli(["trap-design", "--config", str(cfg),
                        "--out-dir", str(out)]) == 0
        res = read_json(out / "trap_design.json")["results"]
        assert abs(res["q_z"] - 0.29) < 0.01


class TestExitCodes:
    def test_unknown_subcommand_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["frobnicate"])
        assert exc.value.code == 2

    def test_unknown_key_exit_2(self, capsys):
        assert run_cli(["thermal", "--set", 'nope="1 K"']) == 2
        err = capsys.readouterr().err
        assert err.startswith("error: UnknownKey:")
        assert "\n" not in err.strip()

    def test_physics_error_exit_1(self, tmp_path, capsys):
        # flat PSD input: peak not resolved -> runtime physics error
        psd_file = tmp_path / "flat.csv"
        with open(psd_file, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["freq_hz", "psd_m2_per_hz"])
            for f in np.linspace(1, 5000, 500):
                writer.writerow([repr(float(f)), repr(1e-24)])
        code = run_cli(["fit-psd", "--set", f'input="{psd_file}"',
                        "--set", 'particle_radius="264 nm"',
                        "--out-dir", str(tmp_path)])
        assert code == 1
        assert capsys.readouterr().err.startswith("error: PeakNotResolved:")

    def test_seed_required_for_cooling(self, tmp_path):
        code = run_cli(["cooling-sim", "--set", 'particle_radius="264 nm"',
                        "--set", 'pressure="0.01 Torr"',
                        "--out-dir", str(tmp_path)])
        assert code == 2


class TestPipelines:
    def test_odmr_sim_then_fit(self, tmp_path):
        out = tmp_path / "odmr"
        assert run_cli([
            "odmr-sim", "--out-dir", str(out),
            "--set", 'intrinsic_fwhm="8 MHz"',
            "--set", 'strain="6.7 MHz"',
            "--set", 'freq_min="2.62 GHz"', "--set", 'freq_max="3.12 GHz"',
        ]) == 0
        rec = read_json(out / "odmr_sim.json")
        assert len(rec["results"]["dip_centers_hz"]) == 8
        fit_out = tmp_path / "fit"
        assert run_cli([
            "fit-odmr", "--out-dir", str(fit_out),
            "--set", f'input="{out / "odmr_spectrum.csv"}"',
            "--set", "n_dips=2",
        ]) == 0
        dips = read_json(fit_out / "odmr_fit.json")["results"]["dips"]
        centers = sorted(d["center_hz"] for d in dips)
        assert abs(centers[0] - (2.87e9 - 6.7e6)) < 2e5
        assert abs(centers[1] - (2.87e9 + 6.7e6)) < 2e5

    def test_berry_shift_clockwise_slope(self, tmp_path):
        out = tmp_path / "berry"
        assert run_cli([
            "berry-shift", "--out-dir", str(out),
            "--set", 'theta="20.7 deg"', "--set", 'B_static="100 G"',
            "--set", 'rotation_min="0.1 MHz"',
            "--set", 'rotation_max="10 MHz"',
        ]) == 0
        with open(out / "berry_shift.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["rotation_hz", "resonance_hz"]
        res = np.array([[float(a), float(b)] for a, b in rows[1:]])
        assert np.all(np.diff(res[:, 1]) > 0)  # clockwise: rising resonance
        slope = np.polyfit(res[:, 0], res[:, 1], 1)[0]
        assert abs(slope - np.cos(np.radians(20.7))) < 1e-6

    def test_thermal_record(self, tmp_path):
        out = tmp_path / "thermal"
        assert run_cli([
            "thermal", "--out-dir", str(out),
            "--set", 'particle_radius="332 nm"',
            "--set", 'I_532="0.030 W/mm^2"', "--set", 'I_1064="0.520 W/mm^2"',
            "--set", 'eta_532="111 cm^-1"', "--set", 'eta_1064="5.87 cm^-1"',
            "--set", 'a_gas="1.74e-12 m^3/s/K"',
            "--set", 'plateau_T="350 K"', "--set", 'pressure="6.9e-6 Torr"',
        ]) == 0
        res = read_json(out / "thermal.json")["results"]
        assert abs(res["temperature_k"] - 350.0) < 15.0

    def test_rotor_lock_record(self, tmp_path):
        out = tmp_path / "rotor"
        assert run_cli([
            "rotor", "--out-dir", str(out),
            "--set", 'dipole="3.13e-25 C*m"',
            "--set", 'particle_radius="264 nm"',
            "--set", 'pressure="7.5e-3 Torr"',
            "--set", 'E_field="20 V/m"',
            "--set", 'drive_frequency="200 Hz"',
            "--set", 'duration="0.5 s"', "--set", 'dt="50 us"',
            "--set", "initial_omega_fraction=1.0",
        ]) == 0
        res = read_json(out / "rotor.json")["results"]
        assert res["locked"] is True
        assert (out / "rotor_trajectory.csv").exists()

    def test_rabi_sweep_argmin(self, tmp_path):
        out = tmp_path / "rabi"
        assert run_cli([
            "rabi-sweep", "--out-dir", str(out),
            "--set", 'theta="22 deg"',
            "--set", 'reference_rabi="2.72 MHz"',
        ]) == 0
        res = read_json(out / "rabi_sweep.json")["results"]
        assert abs(res["argmin_phi_rad"] - 3 * np.pi / 2) < 1e-9
        with open(out / "rabi_sweep.csv") as fh:
            header = fh.readline().strip().split(",")
        assert header == ["phi_rad", "rabi_factor", "omega_rabi_hz"]

    def test_spin_dynamics_runs(self, tmp_path):
        out = tmp_path / "sd"
        assert run_cli([
            "spin-dynamics", "--out-dir", str(out),
            "--set", 'theta="20.7 deg"',
            "--set", 'rotation_frequency="10 MHz"',
            "--set", 'duration="30 ns"',
        ]) == 0
        res = read_json(out / "spin_dynamics.json")["results"]
        assert res["final_populations"]["zero"] > 0.999
        assert res["max_norm_drift"] < 1e-4

    def test_cooling_sim_deterministic(self, tmp_path):
        args = [
            "cooling-sim", "--seed", "7",
            "--set", 'particle_radius="264 nm"',
            "--set", 'pressure="0.05 Torr"',
            "--set", "duration_damping_times=30.0",
        ]
        outs = []
        for name in ("c1", "c2"):
            out = tmp_path / name
            assert run_cli(args + ["--out-dir", str(out)]) == 0
            outs.append(out)
        for fname in ("cooling_fits.json", "cooling_psd_z.csv"):
            a = (outs[0] / fname).read_bytes()
            b = (outs[1] / fname).read_bytes()
            assert a == b


class TestProvenance:
    def test_schema_validation_and_roundtrip(self, tmp_path):
        jsonschema = pytest.importorskip("jsonschema")
        cfg = tmp_path / "trap.cfg"
        cfg.write_text(TRAP_CFG)
        out = tmp_path / "out"
        run_cli(["trap-design", "--config", str(cfg), "--seed", "5",
                 "--out-dir", str(out)])
        record = read_json(out / "trap_design.json")
        schema_path = (Path(cli.__file__).parent / "schemas"
                       / "run_record.schema.json")
        schema = json.loads(schema_path.read_text())
        jsonschema.validate(record, schema)
        assert record["seed"] == 5
        # embedded config round-trips through the parser to the same values
        values1, _ = resolve(record["config"], cli.TRAP_SCHEMA)
        values2, _ = resolve(load_raw_config(path=str(cfg)), cli.TRAP_SCHEMA)
        assert values1 == values2
