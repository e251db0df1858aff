"""One-loop A-B mass correction in clock time and clock frequency.

The fixed-clock-time loop is a momentum-space convolution of the A and B
kernels.  With the narrow-beam clock frequencies both phases are quadratic,
so the four-dimensional integrand factorizes into one integral per axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate

from .errors import ConvergenceError, InputError
from .gtf import Gaussian4
from .units import FourMomentum, METRIC, on_shell_energy

_PREFACTOR = 1.0 / (4.0 * math.pi**2)
_SQRT_PI_2 = math.sqrt(math.pi / 2.0)
NARROW_BEAM_LIMIT = 0.1


@dataclass(frozen=True)
class LoopConfig:
    """A of mass ``m`` emitting and reabsorbing B of mass ``mu``.

    ``E0`` is the packet's reference energy sqrt(m^2 + p0^2); it is taken
    from ``phi0`` when a packet is supplied and from ``p`` otherwise.
    """

    m: float
    mu: float
    p: FourMomentum
    phi0: Gaussian4 | None = None

    def __post_init__(self):
        if not (self.m > 0 and self.mu > 0):
            raise InputError("loop masses must be positive")
        if not isinstance(self.p, FourMomentum):
            object.__setattr__(self, "p", FourMomentum.from_array(self.p))
        if self.phi0 is not None:
            spread = np.sqrt(self.phi0.momentum_variances())
            if np.any(spread / self.E0 >= NARROW_BEAM_LIMIT):
                raise InputError("initial packet is not narrow relative to its reference energy")

    @classmethod
    def at_rest(cls, m: float, mu: float, phi0: Gaussian4 | None = None) -> "LoopConfig":
        return cls(m, mu, FourMomentum(m, 0.0, 0.0, 0.0), phi0)

    @property
    def p0(self) -> np.ndarray:
        source = self.phi0.p0 if self.phi0 is not None else self.p
        return source.p3

    @property
    def E0(self) -> float:
        return float(on_shell_energy(self.m, self.p0))

    @property
    def M(self) -> float:
        return self.E0 + self.mu

    @property
    def p_sq(self) -> float:
        arr = self.p.as_array()
        return float(arr @ METRIC @ arr)


def clock_frequency_modified(cfg: LoopConfig, p_sq: float | None = None) -> float:
    """Clock frequency of the combined A+B kernel; tends to the A clock frequency as mu -> 0."""
    psq = cfg.p_sq if p_sq is None else p_sq
    return -psq / (2.0 * cfg.M) + cfg.m**2 / (2.0 * cfg.E0) + cfg.mu / 2.0


def _amplitude(cfg: LoopConfig) -> float:
    return _PREFACTOR * cfg.m**2 * cfg.mu**2 / cfg.M**2


def loop_fixed_tau(cfg: LoopConfig, tau) -> np.ndarray | complex:
    """Closed-form loop at clock time ``tau`` (rescaled, coupling dropped)."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau == 0.0):
        raise InputError("the fixed-clock-time loop is singular at tau = 0")
    val = np.asarray(-1j * _amplitude(cfg) / tau**2 * np.exp(-1j * clock_frequency_modified(cfg) * tau))
    return complex(val) if val.ndim == 0 else val


def loop_fourier(cfg: LoopConfig, omega) -> np.ndarray | complex:
    """Loop in clock frequency: i (1/4 pi^2)(m^2 mu^2 / M^2) sqrt(pi/2) |omega - varpi^M|."""
    omega = np.asarray(omega, dtype=float)
    val = np.asarray(1j * _amplitude(cfg) * _SQRT_PI_2 * np.abs(omega - clock_frequency_modified(cfg)))
    return complex(val) if val.ndim == 0 else val


# ---------------------------------------------------------------- brute force


class OracleResult(NamedTuple):
    value: complex
    packet_weighted: complex
    tail: float
    doubling_change: float
    boxes: tuple[float, ...]
    sweep: tuple[complex, ...]


def _fresnel_scale(cfg: LoopConfig, tau: float) -> float:
    # curvature of the summed A and B phases per axis is tau * M / (2 E0 mu)
    return math.sqrt(2.0 * cfg.E0 * cfg.mu / (cfg.M * tau))


def _axis_integral(cfg: LoopConfig, tau: float, axis: int, box: float, points: int) -> complex:
    """Gaussian-damped trapezoid integral over one momentum axis, box centred on k = 0."""
    sign = METRIC[axis, axis]
    pj = cfg.p.as_array()[axis]
    k = np.linspace(-8.0 * box, 8.0 * box, points)
    phase = sign * tau * ((pj - k) ** 2 / (2.0 * cfg.E0) + k**2 / (2.0 * cfg.mu))
    f = np.exp(1j * phase - 0.5 * (k / box) ** 2)
    return complex(np.trapezoid(f, k)) / (2.0 * math.pi)


def oracle_product(cfg: LoopConfig, tau: float, box: float, points: int) -> complex:
    """Tensor-product quadrature of the kernel product over d^4k/(2 pi)^4 at one box size."""
    const = -tau * (cfg.m**2 / (2.0 * cfg.E0) + cfg.mu / 2.0)
    val = np.exp(1j * const)
    for axis in range(4):
        val *= _axis_integral(cfg, tau, axis, box, points)
    return complex(val)


def _richardson(boxes: np.ndarray, values: np.ndarray) -> complex:
    # damping error is a power series in 1/box^2
    h = 1.0 / boxes**2
    coef_re = np.polyfit(h, values.real, len(h) - 1)
    coef_im = np.polyfit(h, values.imag, len(h) - 1)
    return complex(coef_re[-1], coef_im[-1])


def loop_numeric_oracle(
    cfg: LoopConfig,
    tau: float,
    box_factors=(12.0, 16.0, 24.0, 32.0),
    points_per_unit: float = 40.0,
    tail_tol: float = 5e-3,
) -> OracleResult:
    """Brute-force fixed-clock-time loop.

    The kernel phases use the narrow-beam clock frequencies
    -(w^2 - k^2 - mu^2)/(2 mu) and -(E^2 - p^2 - m^2)/(2 E0).  The k integral
    is oscillatory, so it is summed under a Gaussian damping of width
    ``box`` (in units of the Fresnel scale) that is swept outward and
    extrapolated to infinite width.  ``tail`` is the relative distance of the
    widest box from the extrapolation; ``doubling_change`` is the relative
    change when the widest box is re-run with twice the points.
    """
    if tau <= 0:
        raise InputError("the loop runs past to future; tau must be positive")
    scale = _fresnel_scale(cfg, tau)
    factors = np.asarray(sorted(box_factors), dtype=float)
    if factors[0] < 6.0:
        raise InputError("integration box must cover at least 6 Fresnel scales")
    boxes = factors * scale

    def points_for(f: float) -> int:
        # resolve the phase at the box edge; grid spans +-8 box
        return int(points_per_unit * 16.0 * f * f) | 1

    sweep = np.array([oracle_product(cfg, tau, b, points_for(f)) for b, f in zip(boxes, factors)])
    extrap = _richardson(factors, sweep)
    tail = abs(sweep[-1] - extrap) / abs(extrap)
    doubled = oracle_product(cfg, tau, boxes[-1], 2 * points_for(factors[-1]) - 1)
    change = abs(doubled - sweep[-1]) / abs(sweep[-1])
    if not np.isfinite(extrap) or tail > tail_tol or change > tail_tol:
        raise ConvergenceError(
            f"loop quadrature not converged: tail {tail:.3g}, doubling change {change:.3g}")
    weight = 1.0 + 0j
    if cfg.phi0 is not None:
        weight = complex(cfg.phi0.to_momentum().amplitude(cfg.p.as_array()))
    return OracleResult(extrap, extrap * weight, float(tail), float(change),
                        tuple(float(b) for b in boxes), tuple(complex(v) for v in sweep))


# ----------------------------------------------------------- clock frequency


def finite_part_fourier(
    envelope: Callable[[float], complex],
    u: float,
    tau_mins=(0.04, 0.02, 0.01),
) -> complex:
    """Hadamard finite part of (1/sqrt(2 pi)) int e^{i u tau} envelope(tau) d tau.

    ``envelope`` behaves like c / tau^2 at the origin and is smooth and
    non-oscillatory elsewhere.  The symmetric window |tau| > tau_min is
    integrated with QAWF, the 2 c / tau_min counterterm removed, and the
    result extrapolated to tau_min -> 0.
    """
    def even(t):
        return envelope(t) + envelope(-t)

    def odd(t):
        return envelope(t) - envelope(-t)

    def window(tm: float) -> complex:
        total = 0j
        for part, weight, unit in ((even, "cos", 1.0), (odd, "sin", 1j)):
            for comp, cunit in ((np.real, 1.0), (np.imag, 1j)):
                fn = lambda t, p=part, c=comp: float(c(p(t)))  # noqa: E731
                if u == 0.0:
                    if weight == "sin":
                        continue
                    val = integrate.quad(fn, tm, np.inf, limit=400)[0]
                else:
                    val = integrate.quad(fn, tm, np.inf, weight=weight, wvar=abs(u), limlst=200)[0]
                    if weight == "sin" and u < 0:
                        val = -val
                total += unit * cunit * val
        tiny = tm * 1e-6
        coeff = tiny**2 * 0.5 * even(tiny)
        return total - 2.0 * coeff / tm

    tm = np.asarray(tau_mins, dtype=float)
    vals = np.array([window(t) for t in tm])
    # leading window error is linear in tau_min
    re = np.polyfit(tm, vals.real, len(tm) - 1)[-1]
    im = np.polyfit(tm, vals.imag, len(tm) - 1)[-1]
    return complex(re, im) / math.sqrt(2.0 * math.pi)


def loop_fourier_oracle(cfg: LoopConfig, omega: float, tau_mins=None) -> complex:
    """Numerical clock-time transform of ``loop_fixed_tau``.

    The carrier exp(-i varpi^M tau) is demodulated so the QAWF weight runs
    at the offset frequency omega - varpi^M.
    """
    w = clock_frequency_modified(cfg)
    u = omega - w
    if tau_mins is None:
        base = 0.04 / max(abs(u), 1.0)
        tau_mins = (base, base / 2.0, base / 4.0)

    def envelope(t):
        return loop_fixed_tau(cfg, t) * np.exp(1j * w * t)

    return finite_part_fourier(envelope, u, tau_mins)


# ----------------------------------------------------------- mass correction


class MassCorrection(NamedTuple):
    closed_form: float
    quadrature: float


def mass_correction(cfg: LoopConfig, sigma_E: float, points: int = 64) -> MassCorrection:
    """Mean |omega - varpi^M| over the packet's energy cloud.

    A component off the centre by dE has clock frequency
    -((M + dE)^2 - M^2) / (2 (M + dE)) against the linear estimate -dE; the
    difference dE^2 / (2 (M + dE)) is averaged over exp(-dE^2 / sigma_E^2)
    by Gauss-Hermite quadrature.  The narrow-beam value is sigma_E^2/(4 M).
    """
    if not sigma_E > 0:
        raise InputError("sigma_E must be positive")
    nodes, weights = np.polynomial.hermite.hermgauss(points)
    dE = sigma_E * nodes
    if np.any(cfg.M + dE <= 0):
        raise InputError("energy cloud reaches zero total energy; narrow-beam regime required")
    remainder = dE**2 / (2.0 * (cfg.M + dE))
    quad = float(weights @ remainder / math.sqrt(math.pi))
    return MassCorrection(sigma_E**2 / (4.0 * cfg.M), quad)


# --------------------------------------------------------------------- export


def tau_sweep_rows(cfg: LoopConfig, taus) -> list[tuple[float, float, float]]:
    vals = np.atleast_1d(loop_fixed_tau(cfg, np.asarray(taus, dtype=float)))
    return [(float(t), float(v.real), float(v.imag)) for t, v in zip(np.atleast_1d(taus), vals)]


def omega_curve_rows(cfg: LoopConfig, omegas) -> list[tuple[float, float]]:
    vals = np.atleast_1d(loop_fourier(cfg, np.asarray(omegas, dtype=float)))
    return [(float(w), float(abs(v))) for w, v in zip(np.atleast_1d(omegas), vals)]
