"""Physical constants and default material/instrument parameters.

Conventions used throughout the package:

* spin-physics frequencies (zero-field splitting, Zeeman, microwave,
  rotation) are angular, in rad/s,
* mechanical drive frequencies for the Paul trap are cyclic, in Hz,
* everything else is SI.
"""

import numpy as np

# fundamental constants (CODATA 2018)
E_CHARGE = 1.602176634e-19      # C
K_B = 1.380649e-23              # J/K
HBAR = 1.054571817e-34          # J s
C_LIGHT = 299792458.0           # m/s
AMU = 1.66053906660e-27         # kg

# electron and 14N gyromagnetic ratios, rad/s per tesla
GAMMA_E = 2 * np.pi * 28.024e9
GAMMA_N14 = 2 * np.pi * 3.077e6

# NV zero-field splitting at room temperature, rad/s
D_ZFS = 2 * np.pi * 2.87e9

# air at room temperature
AIR_MOLAR_MASS_KG = 28.97e-3 / 6.02214076e23   # mean molecular mass, kg
AIR_HEAT_CAPACITY_RATIO = 7.0 / 5.0

# Riemann zeta(5), used by the black-body cooling coefficient
ZETA_5 = 1.0369277551433699

# unit conversions fixed at every I/O boundary
PA_PER_TORR = 133.322
PA_PER_BAR = 1.0e5
TESLA_PER_GAUSS = 1.0e-4
W_PER_M2_PER_W_PER_MM2 = 1.0e6
PER_M_PER_PER_CM = 100.0


def mean_thermal_speed(temperature, molecular_mass=AIR_MOLAR_MASS_KG):
    """Mean (not rms) thermal speed sqrt(8 kT / pi m) of gas molecules, m/s."""
    return float(np.sqrt(8.0 * K_B * temperature / (np.pi * molecular_mass)))
