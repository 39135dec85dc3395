"""Strict, unit-aware run configuration.

Configs are flat key-value text files (``key = "value with unit"``; ``#``
comments) or, interchangeably, a JSON object with the same keys and string
values.  Every physical quantity must carry an explicit unit suffix; unknown
keys, missing units, and malformed values are hard errors naming the key.
Quantities are converted once, at this boundary, to the package-internal
conventions (SI, angles in radians, spin frequencies in rad/s).
"""

import json
import re

import numpy as np

from .constants import E_CHARGE, PA_PER_TORR
from .errors import BadValue, MissingUnit, UnknownKey

TWO_PI = 2 * np.pi

# unit factors per dimension; target units noted per entry
UNIT_TABLE = {
    # spin/rotation frequencies -> rad/s (angular)
    "angular_frequency": {
        "GHz": TWO_PI * 1e9, "MHz": TWO_PI * 1e6, "kHz": TWO_PI * 1e3,
        "Hz": TWO_PI, "rad/s": 1.0,
    },
    # mechanical/cyclic frequencies -> Hz
    "frequency": {"GHz": 1e9, "MHz": 1e6, "kHz": 1e3, "Hz": 1.0},
    "field": {"T": 1.0, "mT": 1e-3, "uT": 1e-6, "G": 1e-4},
    "pressure": {"Pa": 1.0, "Torr": PA_PER_TORR, "mbar": 100.0, "bar": 1e5},
    "intensity": {"W/m^2": 1.0, "W/mm^2": 1e6, "mW/mm^2": 1e3},
    "absorption": {"1/m": 1.0, "m^-1": 1.0, "1/cm": 100.0, "cm^-1": 100.0},
    "length": {"m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9},
    "angle": {"rad": 1.0, "deg": np.pi / 180.0},
    "voltage": {"V": 1.0, "kV": 1e3},
    "efield": {"V/m": 1.0, "kV/m": 1e3, "V/mm": 1e3},
    "charge": {"C": 1.0, "e": E_CHARGE},
    "density": {"kg/m^3": 1.0, "g/cm^3": 1e3},
    "temperature": {"K": 1.0},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9},
    "rate": {"1/s": 1.0, "s^-1": 1.0},
    "dipole": {"C*m": 1.0, "C m": 1.0, "e*um": E_CHARGE * 1e-6},
    "gyromagnetic": {"GHz/T": TWO_PI * 1e9, "MHz/T": TWO_PI * 1e6},
    "gas_coefficient": {"m^3/s/K": 1.0},
    "mass": {"kg": 1.0, "g": 1e-3},
}

_NUMBER_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


class Field:
    """Schema entry for one configuration key."""

    def __init__(self, kind, required=False, default=None, choices=None,
                 many=False):
        self.kind = kind            # dimension name, or int/float/str/bool
        self.required = required
        self.default = default
        self.choices = choices
        self.many = many            # comma-separated list of quantities

    def convert(self, key, raw):
        if self.many:
            if not isinstance(raw, str):
                raise BadValue(key, raw, "expected a comma-separated string")
            return [self._convert_one(key, part.strip())
                    for part in raw.split(",") if part.strip()]
        return self._convert_one(key, raw)

    def _convert_one(self, key, raw):
        if self.kind == "int":
            try:
                if isinstance(raw, bool) or (isinstance(raw, float)
                                             and not raw.is_integer()):
                    raise ValueError
                return int(raw)
            except (TypeError, ValueError):
                raise BadValue(key, raw, "expected an integer") from None
        if self.kind == "float":
            try:
                return float(raw)
            except (TypeError, ValueError):
                raise BadValue(key, raw, "expected a number") from None
        if self.kind == "bool":
            if isinstance(raw, bool):
                return raw
            if isinstance(raw, str) and raw.lower() in ("true", "false"):
                return raw.lower() == "true"
            raise BadValue(key, raw, "expected true/false")
        if self.kind == "str":
            if not isinstance(raw, str):
                raise BadValue(key, raw, "expected a string")
            if self.choices and raw not in self.choices:
                raise BadValue(key, raw, f"expected one of {self.choices}")
            return raw
        # dimensioned quantity
        units = UNIT_TABLE[self.kind]
        if not isinstance(raw, str):
            raise MissingUnit(key, raw)
        text = raw.strip()
        m = re.match(r"^([+-]?[\d.eE+-]+)\s+(.+)$", text)
        if m is None:
            if _NUMBER_RE.match(text):
                raise MissingUnit(key, raw)
            raise BadValue(key, raw, "expected 'NUMBER UNIT'")
        num_text, unit = m.group(1), m.group(2).strip()
        if not _NUMBER_RE.match(num_text):
            raise BadValue(key, raw, "unparsable number")
        if unit not in units:
            raise BadValue(
                key, raw,
                f"unknown unit {unit!r} for {self.kind} "
                f"(accepted: {sorted(units)})",
            )
        return float(num_text) * units[unit]


def _parse_kv_text(text):
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise BadValue(f"line {lineno}", line, "expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if value.startswith('"') and value.endswith('"') and len(value) >= 2:
            out[key] = value[1:-1]
        elif value.lower() in ("true", "false"):
            out[key] = value.lower() == "true"
        elif _NUMBER_RE.match(value):
            out[key] = int(value) if re.match(r"^[+-]?\d+$", value) else float(value)
        else:
            raise BadValue(key, value, "unquoted values must be numbers or booleans")
    return out


def load_raw_config(path=None, text=None, overrides=None):
    """Read a raw key -> value map from a file/text plus --set overrides."""
    raw = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    if text is not None:
        stripped = text.lstrip()
        if stripped.startswith("{"):
            loaded = json.loads(text)
            if not isinstance(loaded, dict):
                raise BadValue("<config>", text[:40], "JSON config must be an object")
            raw.update(loaded)
        else:
            raw.update(_parse_kv_text(text))
    for item in overrides or []:
        if "=" not in item:
            raise BadValue("--set", item, "expected KEY=VALUE")
        key, _, value = item.partition("=")
        parsed = _parse_kv_text(f"{key} = {value}")
        raw.update(parsed)
    return raw


def resolve(raw, schema):
    """Validate a raw map against a schema and convert to internal units.

    Returns:
        (values, resolved_raw): converted values keyed by schema name, and
        the normalized raw map (defaults filled in) suitable for provenance
        embedding; feeding ``resolved_raw`` back through :func:`resolve`
        reproduces ``values`` exactly.

    Raises:
        UnknownKey, MissingUnit, BadValue.
    """
    for key in raw:
        if key not in schema:
            raise UnknownKey(key)
    values = {}
    resolved_raw = {}
    for key, field in schema.items():
        if key in raw:
            resolved_raw[key] = raw[key]
            values[key] = field.convert(key, raw[key])
        elif field.required:
            raise BadValue(key, None, "required key is missing")
        elif field.default is not None:
            resolved_raw[key] = field.default
            values[key] = field.convert(key, field.default)
        else:
            values[key] = None
    return values, resolved_raw
