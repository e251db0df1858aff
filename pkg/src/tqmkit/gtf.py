"""Gaussian test functions: 1D and 4D packets, entropic energy estimate, free evolution.

Conventions
-----------
Coordinate representation along one axis::

    phi(x) = N exp(i s p0 x - (x - c)^2 / (2 S))

with ``s = +1`` for space axes and ``s = -1`` for the time axis, so a packet
carries ``exp(-i E0 t + i p.x)``.  The momentum representation is::

    phi(p) = N exp(-i s (p - p0) c - (p - p0)^2 / (2 P))

and the Fourier pair maps ``S -> P = 1/S`` (``sigma -> 1/sigma``).  The
complex spreading factor of free evolution lives inside ``S``; the density
variance is always ``1 / (2 Re(1/S))``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import InputError, ZeroDispersionError
from .units import DEFAULT_TOL, METRIC, FourMomentum

AXES = ("time", "x", "y", "z")
REPRESENTATIONS = ("coordinate", "momentum")


def axis_sign(axis: str) -> int:
    if axis not in AXES:
        raise InputError(f"unknown axis {axis!r}")
    return -1 if axis == "time" else 1


@dataclass(frozen=True)
class Gaussian1:
    center: float
    mean_conjugate: float
    sigma_sq: complex
    axis: str = "x"
    representation: str = "coordinate"

    def __post_init__(self):
        axis_sign(self.axis)
        if self.representation not in REPRESENTATIONS:
            raise InputError(f"unknown representation {self.representation!r}")
        s = complex(self.sigma_sq)
        if not np.isfinite(s.real) or not np.isfinite(s.imag):
            raise InputError("sigma_sq must be finite")
        if s == 0 or (1.0 / s).real <= 0.0:
            raise ZeroDispersionError("Gaussian is not normalizable: Re(1/sigma_sq) must be positive")
        object.__setattr__(self, "sigma_sq", s)

    @property
    def sign(self) -> int:
        return axis_sign(self.axis)

    @property
    def _precision(self) -> float:
        return (1.0 / self.sigma_sq).real

    @property
    def norm_const(self) -> float:
        return (self._precision / np.pi) ** 0.25

    @property
    def location(self) -> float:
        """Center of |phi|^2 in this representation."""
        return self.center if self.representation == "coordinate" else self.mean_conjugate

    @property
    def variance(self) -> float:
        """Variance of |phi|^2 in this representation."""
        return 0.5 / self._precision

    @property
    def width(self) -> float:
        """The Gaussian parameter sigma (sqrt of |sigma_sq| for a real dispersion)."""
        return float(np.sqrt(abs(self.sigma_sq)))

    def amplitude(self, u):
        u = np.asarray(u, dtype=float)
        s = self.sign
        if self.representation == "coordinate":
            arg = 1j * s * self.mean_conjugate * u - (u - self.center) ** 2 / (2.0 * self.sigma_sq)
        else:
            d = u - self.mean_conjugate
            arg = -1j * s * d * self.center - d**2 / (2.0 * self.sigma_sq)
        return self.norm_const * np.exp(arg)

    def density(self, u):
        return np.abs(self.amplitude(u)) ** 2


def fourier_pair(g: Gaussian1) -> Gaussian1:
    """Switch representation; dispersion goes to its reciprocal. Exact up to a global phase."""
    other = "momentum" if g.representation == "coordinate" else "coordinate"
    return replace(g, sigma_sq=1.0 / g.sigma_sq, representation=other)


def gauss_hermite_expectation(g: Gaussian1, func: Callable, points: int | None = None) -> float:
    """Expectation of ``func`` under |phi|^2 using Gauss-Hermite nodes and the packet's own amplitude."""
    n = points or DEFAULT_TOL.quad_points
    nodes, weights = np.polynomial.hermite.hermgauss(n)
    scale = np.sqrt(g.variance * 2.0)
    u = g.location + scale * nodes
    vals = g.density(u) * np.exp(nodes**2) * scale
    return float(np.sum(weights * vals * func(u)))


def free_evolve(g: Gaussian1, tau: float, mass: float) -> Gaussian1:
    """Coordinate-representation packet after clock time ``tau`` of free evolution with mass ``mass``.

    Space axes follow exp(-i tau p^2 / 2m); the time axis follows exp(+i tau E^2 / 2m).
    The returned packet equals the evolved one up to a global phase.
    """
    if mass <= 0:
        raise InputError("mass must be positive")
    if g.representation != "coordinate":
        raise InputError("free_evolve expects a coordinate-representation packet")
    s = g.sign
    return replace(
        g,
        center=g.center + g.mean_conjugate * tau / mass,
        sigma_sq=g.sigma_sq + 1j * s * tau / mass,
    )


def time_density(g: Gaussian1, tau: float, E0: float, m: float | None = None) -> tuple[float, float]:
    """Mean and variance of the coordinate-time density after clock time ``tau``.

    Mean drifts as ``t0 + (E0/m) tau``; ``m`` defaults to ``E0`` so an on-shell
    packet keeps pace with the lab clock.  The spreading uses ``E0`` as mass.
    """
    if g.axis != "time" or g.representation != "coordinate":
        raise InputError("time_density expects a coordinate-representation time-axis packet")
    if E0 <= 0:
        raise InputError("E0 must be positive")
    m = E0 if m is None else m
    if m <= 0:
        raise InputError("m must be positive")
    spread = g.sigma_sq - 1j * tau / E0
    var = 0.5 / (1.0 / spread).real
    return g.center + (E0 / m) * tau, float(var)


def space_density_nr(g: Gaussian1, tau: float, m: float, p0: float | None = None) -> tuple[float, float]:
    """Mean and variance of the nonrelativistic spatial density after clock time ``tau``."""
    if g.axis == "time" or g.representation != "coordinate":
        raise InputError("space_density_nr expects a coordinate-representation space-axis packet")
    if m <= 0:
        raise InputError("m must be positive")
    p0 = g.mean_conjugate if p0 is None else p0
    spread = g.sigma_sq + 1j * tau / m
    var = 0.5 / (1.0 / spread).real
    return g.center + (p0 / m) * tau, float(var)


def kink_time(sigma_sq: float, mass: float) -> float:
    """Clock time where the spreading term equals the initial width."""
    return mass * sigma_sq


@dataclass(frozen=True)
class EntropicInputs:
    mean_p: tuple = (0.0, 0.0, 0.0)
    mean_p_sq: float = 0.0
    mass: float = 1.0
    tau0: float = 0.0
    norm: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.mean_p, dtype=float)
        if p.shape != (3,):
            raise InputError("mean_p must be a 3-vector")
        object.__setattr__(self, "mean_p", tuple(float(v) for v in p))
        if self.norm != 1.0:
            raise InputError("entropic inputs assume a normalized wave function")
        if self.mass < 0:
            raise InputError("mass must be non-negative")
        if self.mean_p_sq < float(p @ p) * (1 - 1e-15):
            raise InputError("<p^2> must be at least |<p>|^2")

    @property
    def mean_energy(self) -> float:
        p = np.asarray(self.mean_p)
        return float(np.sqrt(self.mass**2 + p @ p))

    @property
    def mean_energy_sq(self) -> float:
        return self.mass**2 + self.mean_p_sq


def entropic_estimate(inp: EntropicInputs) -> Gaussian1:
    """Maximum-entropy energy profile matching <1>, <E> and <E^2>.

    Returned in the energy (momentum) representation of the time axis with
    ``sigma_sq = sigma_E^2 = 2 (<E^2> - Ebar^2)``.
    """
    ebar = inp.mean_energy
    sig_e_sq = 2.0 * (inp.mean_energy_sq - ebar**2)
    if not sig_e_sq > 0.0:
        raise ZeroDispersionError("zero energy dispersion: <p^2> equals |<p>|^2; widen the packet")
    return Gaussian1(center=inp.tau0, mean_conjugate=ebar, sigma_sq=sig_e_sq,
                     axis="time", representation="momentum")


def free_phase(p, tau: float, m: float):
    """Clock-time phase exp(i tau (p^2 - m^2) / (2m)) at four-momenta ``p`` (shape (..., 4))."""
    p = np.asarray(p, dtype=float)
    psq = p[..., 0] ** 2 - p[..., 1] ** 2 - p[..., 2] ** 2 - p[..., 3] ** 2
    return np.exp(1j * tau * (psq - m * m) / (2.0 * m))


@dataclass(frozen=True)
class Gaussian4:
    """4D packet; ``Sigma`` is the dispersion matrix of whichever representation ``rep`` names."""

    x0: np.ndarray
    p0: FourMomentum
    Sigma: np.ndarray
    rep: str = "coordinate"
    global_phase: complex = 1.0 + 0j
    tau: float = 0.0
    mass: float | None = None
    _precision: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float)
        if x0.shape != (4,):
            raise InputError("x0 must be a four-vector")
        sig = np.asarray(self.Sigma, dtype=float)
        if sig.shape != (4, 4):
            raise InputError("Sigma must be 4x4")
        if not np.allclose(sig, sig.T, rtol=0, atol=1e-14 * max(1.0, np.abs(sig).max())):
            raise InputError("Sigma must be symmetric")
        try:
            np.linalg.cholesky(sig)
        except np.linalg.LinAlgError as exc:
            raise ZeroDispersionError("Sigma must be positive definite") from exc
        if self.rep not in REPRESENTATIONS:
            raise InputError(f"unknown representation {self.rep!r}")
        if not np.isclose(abs(self.global_phase), 1.0):
            raise InputError("global_phase must have unit modulus")
        if self.tau != 0.0 and self.rep != "momentum":
            raise InputError("clock-time phase is only carried in the momentum representation")
        x0.setflags(write=False)
        sig = sig.copy()
        sig.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "Sigma", sig)
        object.__setattr__(self, "_precision", np.linalg.inv(sig))

    @classmethod
    def diagonal(cls, x0, p0: FourMomentum, sigmas, rep: str = "coordinate") -> "Gaussian4":
        s = np.asarray(sigmas, dtype=float)
        return cls(np.asarray(x0, dtype=float), p0, np.diag(s**2), rep)

    @property
    def is_diagonal(self) -> bool:
        return bool(np.all(self.Sigma[~np.eye(4, dtype=bool)] == 0.0))

    @property
    def norm_const(self) -> float:
        return float((np.pi**4 * np.linalg.det(self.Sigma)) ** -0.25)

    def amplitude(self, pts):
        """Evaluate at points of shape (..., 4), ordered (t, x, y, z) or (E, px, py, pz)."""
        pts = np.asarray(pts, dtype=float)
        if self.rep == "coordinate":
            d = pts - self.x0
            phase = -1j * (pts @ METRIC @ self.p0.as_array())
        else:
            d = pts - self.p0.as_array()
            phase = 1j * (d @ METRIC @ self.x0)
        quad = np.einsum("...i,ij,...j->...", d, self._precision, d)
        amp = self.global_phase * self.norm_const * np.exp(phase - 0.5 * quad)
        if self.tau != 0.0:
            amp = amp * free_phase(pts, self.tau, self.mass)
        return amp

    def density(self, pts):
        return np.abs(self.amplitude(pts)) ** 2

    def axis_factor(self, index: int) -> Gaussian1:
        """One-axis factor of a diagonal packet."""
        if not self.is_diagonal:
            raise InputError("only diagonal packets factorize")
        return Gaussian1(center=float(self.x0[index]), mean_conjugate=float(self.p0.as_array()[index]),
                         sigma_sq=float(self.Sigma[index, index]), axis=AXES[index],
                         representation=self.rep)

    def factors(self) -> list[Gaussian1]:
        return [self.axis_factor(i) for i in range(4)]

    def coordinate_variances(self) -> np.ndarray:
        """Per-axis variance of |psi|^2 in coordinate space (tau = 0)."""
        cov = self.Sigma if self.rep == "coordinate" else self._precision
        return 0.5 * np.diag(cov).copy()

    def momentum_variances(self) -> np.ndarray:
        cov = self._precision if self.rep == "coordinate" else self.Sigma
        return 0.5 * np.diag(cov).copy()

    def to_momentum(self) -> "Gaussian4":
        if self.rep == "momentum":
            return self
        return Gaussian4(self.x0, self.p0, self._precision, "momentum", self.global_phase)

    def to_coordinate(self) -> "Gaussian4":
        if self.rep == "coordinate":
            return self
        if self.tau != 0.0:
            raise InputError("evolved packet has no Gaussian coordinate form with a real dispersion")
        return Gaussian4(self.x0, self.p0, self._precision, "coordinate", self.global_phase)

    def to_json(self) -> dict:
        out = {"center": [float(v) for v in self.x0], "p0": [float(v) for v in self.p0.as_array()],
               "rep": self.rep}
        if self.is_diagonal:
            out["sigma"] = [float(v) for v in np.sqrt(np.diag(self.Sigma))]
        else:
            out["sigma_matrix"] = [float(v) for v in self.Sigma.ravel()]
        return out

    @classmethod
    def from_json(cls, obj) -> "Gaussian4":
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            center = obj["center"]
            p0 = FourMomentum.from_array(obj["p0"])
            rep = obj.get("rep", "coordinate")
        except (KeyError, TypeError) as exc:
            raise InputError(f"packet JSON missing field: {exc}") from exc
        if "sigma_matrix" in obj:
            sig = np.asarray(obj["sigma_matrix"], dtype=float)
            if sig.size != 16:
                raise InputError("sigma_matrix needs 16 entries")
            return cls(np.asarray(center, dtype=float), p0, sig.reshape(4, 4), rep)
        if "sigma" in obj:
            s = np.asarray(obj["sigma"], dtype=float)
            if s.shape != (4,):
                raise InputError("sigma needs 4 entries")
            return cls.diagonal(center, p0, s, rep)
        raise InputError("packet JSON needs sigma or sigma_matrix")


def evolve_momentum(g: Gaussian4, tau: float, m: float) -> Gaussian4:
    """Apply the free clock-time phase exp(i tau (p^2 - m^2)/(2m)) pointwise in momentum space."""
    if g.rep != "momentum":
        raise InputError("evolve_momentum expects a momentum-representation packet")
    if m <= 0:
        raise InputError("mass must be positive")
    if g.tau != 0.0 and g.mass != m:
        raise InputError("cannot compose clock-time phases with different masses")
    return replace(g, tau=g.tau + tau, mass=m)


def entropic_partner(energy: Gaussian1) -> Gaussian1:
    """Coordinate-time packet paired with an entropic energy profile."""
    if energy.axis != "time":
        raise InputError("expected an energy-axis packet")
    return fourier_pair(energy) if energy.representation == "momentum" else energy

