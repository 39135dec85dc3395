"""Desk-scale spin-mechanics toolkit for a rotating levitated nanodiamond.

Subpackages cover the complex 3x3 spin substrate (:mod:`levispin.spin_core`),
NV Hamiltonians and pseudo-fields (:mod:`levispin.nv_model`), geometric-phase
resonance physics (:mod:`levispin.berry`), ODMR synthesis/fitting and
thermometry (:mod:`levispin.odmr`), ring-trap characterization
(:mod:`levispin.trap`), driven-rotor and thermal-balance models
(:mod:`levispin.rotor_thermal`), rotation-phase Rabi physics
(:mod:`levispin.rabi`), and stochastic center-of-mass dynamics with feedback
cooling (:mod:`levispin.langevin_cooling`).  The :mod:`levispin.cli` module
binds everything behind a reproducible, unit-aware command line.
"""

__version__ = "0.1.0"
