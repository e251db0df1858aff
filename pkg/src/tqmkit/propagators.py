"""Spin-0, photon and Dirac propagators in packed, unpacked and attosecond forms."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import InputError, PoleError, SingularInputError
from .units import DEFAULT_TOL, METRIC, FourMomentum

FORMS = ("sqm_packed", "tqm_packed", "unpacked", "attosecond")
PACKED_FORMS = ("sqm_packed", "tqm_packed")
EPS_SCALE = 1e-6


@dataclass(frozen=True)
class PropagatorValue:
    value: Union[complex, np.ndarray]
    form: str
    epsilon: float = 0.0

    def __post_init__(self):
        if self.form not in FORMS:
            raise InputError(f"unknown propagator form {self.form!r}")
        if self.form in PACKED_FORMS and not self.epsilon > 0:
            raise InputError("packed forms need epsilon > 0")
        if self.form not in PACKED_FORMS and self.epsilon != 0:
            raise InputError("unpacked and attosecond forms carry epsilon = 0")

    def __complex__(self):
        return complex(self.value)


def _check_energy(w: float) -> None:
    if w == 0:
        raise SingularInputError("w = 0: the 1/2w normalization is undefined")


def clock_frequency(k: FourMomentum, m: float) -> float:
    """-(w^2 - k^2 - m^2) / (2w); zero on shell."""
    _check_energy(k.E)
    return -k.off_shell(m) / (2.0 * k.E)


def _denominator_scale(*terms: float) -> float:
    s = max(abs(t) for t in terms)
    return s if s > 0 else 1.0


def default_epsilon(scale: float) -> float:
    return EPS_SCALE * scale


def spin0_sqm_packed(omega: float, k3, m: float, eps: float | None = None) -> PropagatorValue:
    k3 = np.asarray(k3, dtype=float)
    ksq = float(k3 @ k3)
    if eps is None:
        eps = default_epsilon(_denominator_scale(omega**2, ksq, m**2))
    if not eps > 0:
        raise InputError("eps must be positive")
    return PropagatorValue(1j / (omega**2 - ksq - m**2 + 1j * eps), "sqm_packed", eps)


def spin0_tqm_branches(omega: float, k: FourMomentum, m: float, eps: float | None = None):
    """Forward (+i eps) and backward (-i eps) clock-time branches and the epsilon used."""
    w = k.E
    _check_energy(w)
    base = k.off_shell(m) + 2.0 * w * omega
    if eps is None:
        eps = default_epsilon(_denominator_scale(w**2, k.p3_sq, m**2, 2 * w * omega)) / (2.0 * abs(w))
    if not eps > 0:
        raise InputError("eps must be positive")
    return 1j / (base + 2j * w * eps), 1j / (base - 2j * w * eps), eps


def spin0_tqm_packed(omega: float, k: FourMomentum, m: float, eps: float | None = None) -> PropagatorValue:
    """Sum of both clock-time branches.

    Off resonance and as eps -> 0 this tends to twice the attosecond form at
    omega = 0; weighting each branch by theta(0) = 1/2 recovers it exactly.
    """
    fwd, bwd, eps = spin0_tqm_branches(omega, k, m, eps)
    return PropagatorValue(fwd + bwd, "tqm_packed", eps)


def spin0_unpacked(k: FourMomentum, m: float, tau: float) -> PropagatorValue:
    """sign(tau) exp(-i varpi tau) / (2w); zero at tau = 0 where the two branches cancel."""
    varpi = clock_frequency(k, m)
    sgn = float(np.sign(tau))
    return PropagatorValue(sgn * np.exp(-1j * varpi * tau) / (2.0 * k.E), "unpacked")


def spin0_attosecond(k: FourMomentum, m: float, abs_tol: float | None = None) -> PropagatorValue:
    tol = DEFAULT_TOL.abs_tol if abs_tol is None else abs_tol
    d = k.off_shell(m)
    if abs(d) <= tol * _denominator_scale(k.E**2, k.p3_sq, m**2):
        raise PoleError("attosecond propagator evaluated on shell")
    return PropagatorValue(1j / d, "attosecond")


def photon_tqm(omega: float, k: FourMomentum, eps: float | None = None) -> PropagatorValue:
    """-g^{mu nu} times the massless scalar TQM propagator, as a 4x4 matrix."""
    s = spin0_tqm_packed(omega, k, 0.0, eps)
    return PropagatorValue(-METRIC * s.value, "tqm_packed", s.epsilon)


def photon_attosecond(k: FourMomentum, abs_tol: float | None = None) -> PropagatorValue:
    s = spin0_attosecond(k, 0.0, abs_tol)
    return PropagatorValue(-METRIC * s.value, "attosecond")


# Dirac representation

SIGMA = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
_I2 = np.eye(2, dtype=complex)
_Z2 = np.zeros((2, 2), dtype=complex)
GAMMA0 = np.block([[_I2, _Z2], [_Z2, -_I2]])
GAMMA = (GAMMA0,) + tuple(np.block([[_Z2, s], [-s, _Z2]]) for s in SIGMA)
IDENTITY4 = np.eye(4, dtype=complex)


def slash(p) -> np.ndarray:
    """gamma^mu p_mu = E gamma^0 - p.gamma."""
    a = p.as_array() if isinstance(p, FourMomentum) else np.asarray(p)
    return a[0] * GAMMA[0] - a[1] * GAMMA[1] - a[2] * GAMMA[2] - a[3] * GAMMA[3]


def bar(spinor: np.ndarray) -> np.ndarray:
    return np.conj(spinor) @ GAMMA0


def _spinor_mass(p: FourMomentum, m: float | None) -> float:
    if m is None:
        msq = p.mass_sq()
        if msq <= 0:
            raise InputError("cannot infer a positive mass from a non-timelike momentum")
        m = float(np.sqrt(msq))
    if m <= 0:
        raise InputError("spinors need m > 0")
    if p.E + m <= 0:
        raise InputError("E + m must be positive")
    return m


def _sigma_dot(p3) -> np.ndarray:
    return p3[0] * SIGMA[0] + p3[1] * SIGMA[1] + p3[2] * SIGMA[2]


_CHI = (np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex))


def dirac_u(p: FourMomentum, s: int, m: float | None = None) -> np.ndarray:
    """Positive-energy spinor with the supplied coordinate energy E (on-shell mass if m is None)."""
    if s not in (1, 2):
        raise InputError("spin index must be 1 or 2")
    m = _spinor_mass(p, m)
    chi = _CHI[s - 1]
    lower = _sigma_dot(p.p3) @ chi / (p.E + m)
    return np.sqrt((p.E + m) / (2 * m)) * np.concatenate([chi, lower])


def dirac_v(p: FourMomentum, s: int, m: float | None = None) -> np.ndarray:
    """Negative-energy spinor; v1 carries chi_2 and v2 carries chi_1 in the lower block."""
    if s not in (1, 2):
        raise InputError("spin index must be 1 or 2")
    m = _spinor_mass(p, m)
    chi = _CHI[2 - s]
    upper = _sigma_dot(p.p3) @ chi / (p.E + m)
    return np.sqrt((p.E + m) / (2 * m)) * np.concatenate([upper, chi])


@dataclass(frozen=True)
class SpinorBasis:
    gamma: tuple = GAMMA

    def u(self, p: FourMomentum, s: int, m: float | None = None) -> np.ndarray:
        return dirac_u(p, s, m)

    def v(self, p: FourMomentum, s: int, m: float | None = None) -> np.ndarray:
        return dirac_v(p, s, m)

    def slash(self, p) -> np.ndarray:
        return slash(p)


def dirac_tqm_propagator(omega: float, p: FourMomentum, m: float, eps: float | None = None) -> PropagatorValue:
    """(pslash + m) times the scalar TQM packed propagator."""
    s = spin0_tqm_packed(omega, p, m, eps)
    return PropagatorValue((slash(p) + m * IDENTITY4) * s.value, "tqm_packed", s.epsilon)


def dirac_attosecond(p: FourMomentum, m: float, abs_tol: float | None = None) -> PropagatorValue:
    s = spin0_attosecond(p, m, abs_tol)
    return PropagatorValue((slash(p) + m * IDENTITY4) * s.value, "attosecond")


def vertex_factor(ubar: np.ndarray, mu: int, u: np.ndarray, e: float) -> complex:
    """-i e ubar gamma^mu u."""
    if mu not in range(4):
        raise InputError("mu must be 0..3")
    return complex(-1j * e * (ubar @ GAMMA[mu] @ u))


@dataclass(frozen=True)
class PolarizationBasis:
    """Time-like, two transverse and one longitudinal unit vector for a photon moving along ``direction``."""

    eps: np.ndarray

    @classmethod
    def for_direction(cls, direction) -> "PolarizationBasis":
        n = np.asarray(direction, dtype=float)
        norm = np.linalg.norm(n)
        if norm == 0:
            raise InputError("photon direction must be non-zero")
        n = n / norm
        trial = np.array([1.0, 0, 0]) if abs(n[0]) < 0.9 else np.array([0, 1.0, 0])
        e1 = np.cross(n, trial)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(n, e1)
        eps = np.zeros((4, 4))
        eps[0, 0] = 1.0
        eps[1, 1:] = e1
        eps[2, 1:] = e2
        eps[3, 1:] = n
        return cls(eps)

    def gram(self) -> np.ndarray:
        return self.eps @ METRIC @ self.eps.T
