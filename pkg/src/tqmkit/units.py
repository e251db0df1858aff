"""Natural units (hbar = c = 1, energies in eV), four-vectors and tolerances."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import constants

from .errors import InputError

HBAR_EV_S = constants.physical_constants["reduced Planck constant in eV s"][0]
BOHR_RADIUS_M = constants.physical_constants["Bohr radius"][0]
SPEED_OF_LIGHT = constants.c
ATTOSECOND = 1e-18

# metric signature (+,-,-,-)
METRIC = np.diag([1.0, -1.0, -1.0, -1.0])

TIME_UNITS = ("attoseconds", "eV^-1")
_UNIT_ALIASES = {
    "attoseconds": "attoseconds",
    "as": "attoseconds",
    "eV^-1": "eV^-1",
    "eV-1": "eV^-1",
    "ev^-1": "eV^-1",
    "1/eV": "eV^-1",
    "eV⁻¹": "eV^-1",
}


@dataclass(frozen=True)
class FourMomentum:
    E: float
    px: float = 0.0
    py: float = 0.0
    pz: float = 0.0

    @classmethod
    def from_array(cls, arr) -> "FourMomentum":
        a = np.asarray(arr, dtype=float)
        if a.shape != (4,):
            raise InputError(f"four-momentum needs 4 components, got shape {a.shape}")
        return cls(*map(float, a))

    @classmethod
    def on_shell(cls, m: float, p3) -> "FourMomentum":
        p = np.asarray(p3, dtype=float)
        return cls(on_shell_energy(m, p), *map(float, p))

    @property
    def p3(self) -> np.ndarray:
        return np.array([self.px, self.py, self.pz])

    @property
    def p3_sq(self) -> float:
        return self.px**2 + self.py**2 + self.pz**2

    def as_array(self) -> np.ndarray:
        return np.array([self.E, self.px, self.py, self.pz])

    def mass_sq(self) -> float:
        return minkowski_dot(self, self)

    def off_shell(self, m: float) -> float:
        """E^2 - p^2 - m^2; zero on the mass shell."""
        return self.E**2 - self.p3_sq - m**2

    def __add__(self, other: "FourMomentum") -> "FourMomentum":
        return FourMomentum.from_array(self.as_array() + other.as_array())

    def __sub__(self, other: "FourMomentum") -> "FourMomentum":
        return FourMomentum.from_array(self.as_array() - other.as_array())

    def __neg__(self) -> "FourMomentum":
        return FourMomentum.from_array(-self.as_array())


def minkowski_dot(p, q) -> float:
    a = p.as_array() if isinstance(p, FourMomentum) else np.asarray(p, dtype=float)
    b = q.as_array() if isinstance(q, FourMomentum) else np.asarray(q, dtype=float)
    return float(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3])


def on_shell_energy(m: float, p3) -> float:
    if m < 0:
        raise InputError(f"mass must be non-negative, got {m}")
    p = np.asarray(p3, dtype=float)
    return float(np.hypot(m, np.linalg.norm(p)))


def time_energy_convert(x: float, from_unit: str) -> float:
    """Convert a time between attoseconds and inverse eV.

    ``from_unit`` names the unit of ``x``; the result is in the other unit.
    """
    unit = _UNIT_ALIASES.get(from_unit)
    if unit is None:
        raise InputError(f"unknown time unit {from_unit!r}; expected one of {TIME_UNITS}")
    if unit == "eV^-1":
        return x * HBAR_EV_S / ATTOSECOND
    return x * ATTOSECOND / HBAR_EV_S


def bohr_crossing_time_as() -> float:
    """Light crossing time of one Bohr radius, in attoseconds."""
    return BOHR_RADIUS_M / SPEED_OF_LIGHT / ATTOSECOND


@dataclass(frozen=True)
class Tolerances:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    quad_tol: float = 1e-3
    quad_points: int = 64
    mc_samples: int = 100_000

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "quad_tol", "quad_points", "mc_samples"):
            if not getattr(self, name) > 0:
                raise InputError(f"tolerance {name} must be strictly positive")


DEFAULT_TOL = Tolerances()
