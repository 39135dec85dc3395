"""Exception taxonomy for the toolkit.

Physics and numerics failures derive from ``LevispinError`` (CLI exit code 1);
configuration/usage problems derive from ``ConfigError`` (CLI exit code 2).
"""


class LevispinError(Exception):
    """Base class for runtime physics/numerics errors."""


# spin propagation
class StepTooLarge(LevispinError):
    """Integration step violates the ||H|| * dt stability bound."""


class NonHermitian(LevispinError):
    """A Hamiltonian failed the Hermiticity check."""


# nv model / berry
class ZeroGyromagneticRatio(LevispinError):
    pass


class PathTooCoarse(LevispinError):
    """Successive eigenstate overlaps too small for a discrete phase sum."""


class NoPeakFound(LevispinError):
    """Resonance sweep produced no usable transfer maximum."""


class OffResonance(LevispinError):
    """Drive detuning too large for a reliable Rabi frequency fit."""


# spectra
class GridTooNarrow(LevispinError):
    """Frequency grid does not span the requested dip pattern."""


class NoHalfCrossing(LevispinError):
    """Spectrum never recovers to half depth on one side of the dip."""


class ConvergenceFailure(LevispinError):
    pass


class DegenerateGuess(LevispinError):
    """Two initial dip centers coincide."""


class PeakNotResolved(LevispinError):
    """PSD contains no peak sufficiently above the noise floor."""


# thermometry / thermal balance
class OutOfValidityRange(LevispinError):
    """Temperature outside the polynomial validity window."""


class NoRootInWindow(LevispinError):
    pass


class NoBracket(LevispinError):
    """Root finding could not bracket a solution in the search window."""


# rotor
class ZeroDamping(LevispinError):
    """Zero gas damping makes the model's top speed unbounded."""


# fitting
class SingularDesign(LevispinError):
    """Least-squares design matrix is rank deficient."""


class NoSolution(LevispinError):
    pass


class TooFewSegments(LevispinError):
    """Not enough Welch segments for a usable PSD estimate."""


# configuration / CLI usage
class ConfigError(Exception):
    """Base class for configuration and usage errors."""


class UnknownKey(ConfigError):
    def __init__(self, key):
        super().__init__(f"unknown configuration key: {key!r}")
        self.key = key


class MissingUnit(ConfigError):
    def __init__(self, key, value):
        super().__init__(f"value for {key!r} is missing a unit suffix: {value!r}")
        self.key = key


class BadValue(ConfigError):
    def __init__(self, key, value, reason=""):
        msg = f"bad value for {key!r}: {value!r}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)
        self.key = key
