"""ODMR spectrum synthesis, dip fitting, and spin thermometry.

Spectra are emitted as fractional contrast (0 baseline, dips positive), on a
monotone angular-frequency grid.  Dip centers come from the geometric-phase
resonance formulas per NV orientation; at zero static field the m_s = +-1
pair of each orientation is split by +-(E + |geometric shift|), which reduces
to the strain doublet D +- E at rest and grows symmetrically with rotation
rate for either sense.
"""

import csv
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq, least_squares
from scipy.signal import find_peaks
from scipy.spatial.transform import Rotation

from .berry import ResonanceQuery, resonance_frequency
from .constants import D_ZFS, GAMMA_E, PA_PER_BAR
from .errors import (
    ConvergenceFailure,
    DegenerateGuess,
    GridTooNarrow,
    NoHalfCrossing,
    NoRootInWindow,
    OutOfValidityRange,
)
from .nv_model import FieldEnvironment, NVConfiguration, azimuthal_rate

# <111>-family unit axes of the diamond lattice (pairwise dot products -1/3)
TETRAHEDRAL_AXES = np.array(
    [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float
) / np.sqrt(3)

THERMOMETRY_WINDOW = (250.0, 600.0)  # K, cubic-polynomial validity


@dataclass(frozen=True)
class OrientationEnsemble:
    """Four NV orientation classes under a rigid crystal rotation.

    ``crystal_rotation`` maps crystal-frame vectors into the lab frame; any
    ``scipy.spatial.transform.Rotation`` is accepted.
    """

    crystal_rotation: Rotation

    @classmethod
    def identity(cls):
        return cls(crystal_rotation=Rotation.identity())

    @classmethod
    def axis_aligned(cls, axis_index=0):
        """Rotation bringing one <111> axis onto the lab z axis."""
        n = TETRAHEDRAL_AXES[axis_index]
        rot, _ = Rotation.align_vectors([[0.0, 0.0, 1.0]], [n])
        return cls(crystal_rotation=rot)


def tetrahedral_thetas(ensemble):
    """Angles of the four rotated <111> axes against lab z, folded to [0, pi/2].

    NV axes are headless; folding by |cos| keeps one representative per class
    and leaves every zero-field dip position unchanged.
    """
    axes = ensemble.crystal_rotation.apply(TETRAHEDRAL_AXES)
    cosines = np.abs(axes @ np.array([0.0, 0.0, 1.0]))
    return np.arccos(np.clip(cosines, -1.0, 1.0))


@dataclass(frozen=True)
class LineShape:
    intrinsic_fwhm: float        # rad/s
    contrast_per_dip: float      # fractional, in (0, 0.25]
    strain_E: float = 0.0        # rad/s

    def __post_init__(self):
        if not 0 < self.contrast_per_dip <= 0.25:
            raise ValueError("contrast_per_dip must lie in (0, 0.25]")
        if self.intrinsic_fwhm <= 0:
            raise ValueError("intrinsic_fwhm must be positive")


@dataclass(frozen=True)
class Spectrum:
    freq: np.ndarray      # rad/s, strictly increasing
    contrast: np.ndarray  # >= 0

    def __post_init__(self):
        freq = np.asarray(self.freq, dtype=float)
        contrast = np.asarray(self.contrast, dtype=float)
        if len(freq) != len(contrast):
            raise ValueError("freq and contrast must have equal length")
        if np.any(np.diff(freq) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        object.__setattr__(self, "freq", freq)
        object.__setattr__(self, "contrast", contrast)


@dataclass(frozen=True)
class ODMRFit:
    dips: list            # (center rad/s, fwhm rad/s, amplitude) per dip
    residual_rms: float


def dip_centers(orientations, env, drive_component="longitudinal",
                strain_E=0.0, D=D_ZFS, gamma_e=GAMMA_E):
    """Resonance positions for every (orientation, m_s) pair, rad/s.

    With a static field each orientation contributes its two Zeeman- and
    rotation-shifted lines.  At zero field the +-1 pair is emitted as
    D +- (E + |omega_phi cos(theta)|): strain and geometric splitting add,
    independent of rotation sense.
    """
    thetas = np.atleast_1d(np.asarray(orientations, dtype=float))
    centers = []
    for theta in thetas:
        cfg = NVConfiguration(theta=theta, D=D, E=0.0, gamma_e=gamma_e)
        if env.B_static == 0.0:
            shift = abs(azimuthal_rate(env.omega_r) * np.cos(theta))
            centers.extend([D - (strain_E + shift), D + (strain_E + shift)])
        else:
            for ms in (+1, -1):
                q = ResonanceQuery(ms, drive_component, cfg, env)
                centers.append(resonance_frequency(q))
    return np.array(sorted(centers))


def lorentzian_dip(freq, center, fwhm, amplitude):
    half = fwhm / 2.0
    return amplitude * half**2 / ((freq - center) ** 2 + half**2)


def synth_spectrum(orientations, line, env, grid, drive_component="longitudinal",
                   D=D_ZFS, gamma_e=GAMMA_E):
    """Sum-of-Lorentzian-dips ensemble spectrum.

    Args:
        orientations: an :class:`OrientationEnsemble` or an iterable of theta
            values (radians); each orientation contributes its m_s = +-1 pair.
        grid: angular-frequency samples; must span every dip center by at
            least five intrinsic widths.

    Raises:
        GridTooNarrow: grid does not cover the dip pattern.
    """
    if isinstance(orientations, OrientationEnsemble):
        thetas = tetrahedral_thetas(orientations)
    else:
        thetas = np.atleast_1d(np.asarray(orientations, dtype=float))
    centers = dip_centers(thetas, env, drive_component, line.strain_E, D, gamma_e)
    grid = np.asarray(grid, dtype=float)
    pad = 5 * line.intrinsic_fwhm
    if grid.min() > centers.min() - pad or grid.max() < centers.max() + pad:
        raise GridTooNarrow(
            "grid must span all dip centers by >= 5 intrinsic FWHM"
        )
    contrast = np.zeros_like(grid)
    for c in centers:
        contrast += lorentzian_dip(grid, c, line.intrinsic_fwhm,
                                   line.contrast_per_dip)
    return Spectrum(freq=grid, contrast=contrast)


def fwhm(spectrum):
    """Full width at half maximum of the global dip, rad/s.

    Walks outward from the deepest point to the first crossings of half the
    peak contrast on each side, interpolating linearly between samples.

    Raises:
        NoHalfCrossing: the contrast never recovers to half depth inside the
            grid on one of the sides.
    """
    f, c = spectrum.freq, spectrum.contrast
    i = int(np.argmax(c))
    if i == 0 or i == len(c) - 1:
        raise ValueError("global dip must be interior to the grid")
    half = c[i] / 2.0

    def cross(idx_range, side):
        prev = i
        for j in idx_range:
            if c[j] < half:
                # linear interpolation between j and the previous sample
                f1, f2 = f[j], f[prev]
                c1, c2 = c[j], c[prev]
                return f1 + (half - c1) * (f2 - f1) / (c2 - c1)
            prev = j
        raise NoHalfCrossing(f"no half-depth recovery on the {side} side")

    left = cross(range(i - 1, -1, -1), "left")
    right = cross(range(i + 1, len(c)), "right")
    return float(right - left)


def _multi_lorentzian(freq, params):
    n = len(params) // 3
    out = np.zeros_like(freq)
    for k in range(n):
        c, w, a = params[3 * k: 3 * k + 3]
        out += lorentzian_dip(freq, c, w, a)
    return out


def _auto_guess(spectrum, n_dips):
    f, c = spectrum.freq, spectrum.contrast
    peaks, props = find_peaks(c, prominence=0.05 * c.max())
    order = np.argsort(props["prominences"])[::-1]
    try:
        support = fwhm(spectrum)
    except (NoHalfCrossing, ValueError):
        support = (f[-1] - f[0]) / 4.0
    if len(peaks) >= n_dips:
        centers = sorted(f[peaks[order[:n_dips]]])
    else:
        # merged structure: spread the requested dips across the global
        # dip's half-maximum support
        center0 = f[int(np.argmax(c))]
        centers = center0 + support * np.linspace(-0.5, 0.5, n_dips + 2)[1:-1]
    width = max(support / max(n_dips, 1), 3 * (f[1] - f[0]))
    guess = []
    for ctr in centers:
        amp = float(np.interp(ctr, f, c))
        guess.extend([ctr, width, max(amp, 0.01 * c.max())])
    return np.array(guess)


def fit_dips(spectrum, n_dips, initial_guess=None, max_nfev=20000):
    """Least-squares fit of ``n_dips`` Lorentzian dips to a contrast spectrum.

    Args:
        initial_guess: optional flat array (center, fwhm, amplitude) * n_dips;
            centers in rad/s.  Auto-generated from peak prominences if absent.

    Raises:
        DegenerateGuess: two initial centers coincide.
        ConvergenceFailure: optimizer failed or returned invalid dips.
    """
    if n_dips < 1:
        raise ValueError("n_dips must be >= 1")
    f, c = spectrum.freq, spectrum.contrast
    if initial_guess is None:
        p0 = _auto_guess(spectrum, n_dips)
    else:
        p0 = np.asarray(initial_guess, dtype=float).ravel()
        if len(p0) != 3 * n_dips:
            raise ValueError("initial_guess must supply 3 parameters per dip")
    centers0 = np.sort(p0[0::3])
    min_sep = 1e-9 * max(abs(f[0]), abs(f[-1]), 1.0)
    if n_dips > 1 and np.min(np.diff(centers0)) <= min_sep:
        raise DegenerateGuess("two initial dip centers coincide")

    scale = np.empty_like(p0)
    scale[0::3] = max(abs(f[-1]), abs(f[0]))
    scale[1::3] = f[-1] - f[0]
    scale[2::3] = max(c.max(), 1e-12)

    def residual(p):
        return _multi_lorentzian(f, p * scale) - c

    try:
        res = least_squares(residual, p0 / scale, method="lm", max_nfev=max_nfev)
    except Exception as exc:  # scipy raises on NaN residuals etc.
        raise ConvergenceFailure(str(exc)) from exc
    if not res.success:
        raise ConvergenceFailure(res.message)
    p = res.x * scale
    dips = []
    for k in range(n_dips):
        ctr, wid, amp = p[3 * k: 3 * k + 3]
        wid, amp = abs(wid), amp  # Lorentzian is even in the width sign
        if amp <= 0 or not (f[0] <= ctr <= f[-1]):
            raise ConvergenceFailure(
                "fit produced a nonpositive amplitude or out-of-grid center"
            )
        dips.append((float(ctr), float(wid), float(amp)))
    dips.sort(key=lambda d: d[0])
    rms = float(np.sqrt(np.mean(res.fun**2)))
    return ODMRFit(dips=dips, residual_rms=rms)


# -- thermometry ------------------------------------------------------------


@dataclass(frozen=True)
class ThermometryConstants:
    """Cubic D(T) model in GHz, plus pressure and strain offsets."""

    c0: float = 2.8697            # GHz
    c1: float = 9.7e-5            # GHz/K
    c2: float = -3.7e-7           # GHz/K^2
    c3: float = 1.7e-10           # GHz/K^3
    delta_pressure: float = 1.5e-6  # GHz/bar
    delta_strain: float = 0.0     # GHz, per-particle calibration offset


def d_from_temperature(T, k=ThermometryConstants(), pressure=0.0):
    """Zero-field splitting in GHz at temperature T (K) and pressure (bar).

    Raises:
        OutOfValidityRange: T outside the [250, 600] K polynomial window.
    """
    lo, hi = THERMOMETRY_WINDOW
    if not lo <= T <= hi:
        raise OutOfValidityRange(f"T = {T} K outside [{lo}, {hi}] K")
    return (
        k.c0 + k.c1 * T + k.c2 * T**2 + k.c3 * T**3
        + k.delta_pressure * pressure + k.delta_strain
    )


def temperature_from_d(D_meas, k=ThermometryConstants(), pressure=0.0):
    """Invert the D(T) model by bracketed root finding on [250, 600] K.

    Raises:
        NoRootInWindow: D_meas outside the model's range over the window.
    """
    lo, hi = THERMOMETRY_WINDOW

    def g(T):
        return d_from_temperature(T, k, pressure) - D_meas

    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if np.sign(glo) == np.sign(ghi):
        raise NoRootInWindow(
            f"D = {D_meas} GHz has no root in [{lo}, {hi}] K"
        )
    return float(brentq(g, lo, hi, xtol=1e-4))


def calibrate_strain_offset(k, D_ref, T_ref, pressure=0.0):
    """Fix delta_strain from one simultaneous (D, T) reference measurement."""
    base = d_from_temperature(T_ref, replace(k, delta_strain=0.0), pressure)
    return replace(k, delta_strain=D_ref - base)


def pressure_pa_to_bar(p_pa):
    return p_pa / PA_PER_BAR


# -- external interfaces ----------------------------------------------------


def write_spectrum_csv(path, spectrum):
    """Write the required two-column ``freq_hz, contrast`` CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["freq_hz", "contrast"])
        for w, c in zip(spectrum.freq, spectrum.contrast):
            writer.writerow([repr(float(w) / (2 * np.pi)), repr(float(c))])


def read_spectrum_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header[:2]] != ["freq_hz", "contrast"]:
            raise ValueError("spectrum CSV must start with 'freq_hz, contrast'")
        rows = [(float(r[0]), float(r[1])) for r in reader]
    freq = np.array([r[0] for r in rows]) * 2 * np.pi
    contrast = np.array([r[1] for r in rows])
    return Spectrum(freq=freq, contrast=contrast)


def fit_to_record(fit):
    """JSON-ready dict of a fit, centers and widths in Hz."""
    return {
        "dips": [
            {
                "center_hz": c / (2 * np.pi),
                "fwhm_hz": w / (2 * np.pi),
                "amplitude": a,
            }
            for (c, w, a) in fit.dips
        ],
        "residual_rms": fit.residual_rms,
    }
