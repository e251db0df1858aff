"""ABC toy-model scattering with Gaussian packets, slit-in-time predictions and QED tree denominators."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .detection import tqm_signal
from .errors import InputError, ModelInconsistencyError, NarrowBeamError, PoleError, ZeroDispersionError
from .gtf import Gaussian4
from .propagators import clock_frequency, dirac_u
from .units import DEFAULT_TOL, FourMomentum, minkowski_dot, on_shell_energy

NARROW_BEAM_RATIO = 0.1


@dataclass(frozen=True)
class AbcModel:
    """A and C share mass ``m``; the exchanged B has mass ``mu``; ``lam`` is the coupling."""

    m: float
    mu: float
    lam: float

    def __post_init__(self):
        if not self.m > 0:
            raise InputError("m must be positive")
        if self.mu < 0:
            raise InputError("mu must be non-negative")


def _rotation_axis(p3: np.ndarray) -> np.ndarray:
    trial = np.array([0.0, 0.0, 1.0]) if abs(p3[2]) < 0.9 * np.linalg.norm(p3) else np.array([1.0, 0.0, 0.0])
    axis = np.cross(p3, trial)
    return axis / np.linalg.norm(axis)


def _rotate(v: np.ndarray, axis: np.ndarray, theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return v * c + np.cross(axis, v) * s + axis * (axis @ v) * (1 - c)


@dataclass(frozen=True)
class ScatterEvent:
    p1: FourMomentum
    q2: FourMomentum
    theta: float
    center_of_mass: bool = True

    def __post_init__(self):
        if not self.center_of_mass:
            raise InputError("only center-of-mass events are supported")
        a, b = self.p1.p3, self.q2.p3
        if not np.allclose(a, -b, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(a).max())):
            raise InputError("center-of-mass event needs p1 = -q2")

    @classmethod
    def on_shell(cls, m: float, p3, theta: float) -> "ScatterEvent":
        p = np.asarray(p3, dtype=float)
        return cls(FourMomentum.on_shell(m, p), FourMomentum.on_shell(m, -p), theta)

    @property
    def p_sq(self) -> float:
        return self.p1.p3_sq

    def outgoing(self) -> tuple[FourMomentum, FourMomentum]:
        """Elastic plane-wave kinematics: p3 is p1 rotated by theta, q4 = -p3."""
        p = self.p1.p3
        if self.p_sq == 0:
            return self.p1, self.q2
        p3 = _rotate(p, _rotation_axis(p), self.theta)
        return FourMomentum(self.p1.E, *p3), FourMomentum(self.q2.E, *(-p3))

    def exchanged_momentum_sq(self) -> float:
        return 2.0 * self.p_sq * (1.0 - np.cos(self.theta))


def plane_wave_matrix_element(model: AbcModel, event: ScatterEvent) -> complex:
    """t-channel amplitude i lam^2 / (k^2 + mu^2)."""
    denom = event.exchanged_momentum_sq() + model.mu**2
    if denom == 0:
        raise PoleError("forward scattering with massless exchange: Coulomb pole")
    return 1j * model.lam**2 / denom


def u_channel_matrix_element(model: AbcModel, event: ScatterEvent) -> complex:
    denom = 2.0 * event.p_sq * (1.0 + np.cos(event.theta)) + model.mu**2
    if denom == 0:
        raise PoleError("backward scattering with massless exchange: u-channel pole")
    return 1j * model.lam**2 / denom


def exchanged_energy_tqm(model: AbcModel, event: ScatterEvent, strict: bool = True,
                         abs_tol: float | None = None) -> float:
    """Quantum energy w of the exchanged B from clock-energy conservation.

    With E3 = E1 - w, E4 = E2 + w and elastic outgoing momenta, the condition
    varpi3 + varpi4 = varpi1 + varpi2 reduces to a quadratic with one root at
    w = 0 and the other at (E1 - E2) - (s1 - s2) / (E1 + E2 + 2C), where
    s = p^2 + m^2 and C = varpi1 + varpi2.  The second root is returned; it is
    zero for on-shell legs and moves continuously with an off-shell shift.
    """
    tol = DEFAULT_TOL.abs_tol if abs_tol is None else abs_tol
    m = model.m
    E1, E2 = event.p1.E, event.q2.E
    scale = max(E1**2, E2**2, m**2)
    off = [abs(event.p1.off_shell(m)), abs(event.q2.off_shell(m))]
    if strict and max(off) > tol * scale:
        raise InputError("incoming legs must be on shell")
    c = clock_frequency(event.p1, m) + clock_frequency(event.q2, m)
    s1 = event.p1.p3_sq + m * m
    s2 = event.q2.p3_sq + m * m
    lead = E1 + E2 + 2.0 * c
    if lead == 0:
        raise ModelInconsistencyError("degenerate clock-energy constraint")
    return float((E1 - E2) - (s1 - s2) / lead)


def clock_energy_residual(model: AbcModel, event: ScatterEvent, w: float) -> float:
    """varpi3 + varpi4 - varpi1 - varpi2 for a trial exchanged energy w."""
    m = model.m
    p3, q4 = event.outgoing()
    out3 = FourMomentum(event.p1.E - w, *p3.p3)
    out4 = FourMomentum(event.q2.E + w, *q4.p3)
    return (clock_frequency(out3, m) + clock_frequency(out4, m)
            - clock_frequency(event.p1, m) - clock_frequency(event.q2, m))


@dataclass(frozen=True)
class OutgoingCloud:
    """Outgoing joint Gaussian: per-axis momentum-space dispersions and the energy correlation."""

    sigma_sq: np.ndarray
    p3: FourMomentum
    q4: FourMomentum
    s_bar: complex
    mode: str
    sigma_leg_sq: float = float("nan")
    sigma_matrix: np.ndarray | None = field(default=None, repr=False)

    @property
    def has_energy_axis(self) -> bool:
        return self.mode == "tqm"

    @property
    def sigma_E_sq(self) -> float:
        if not self.has_energy_axis:
            raise InputError("SQM cloud has no energy axis")
        return float(self.sigma_sq[0])

    @property
    def space_sigma_sq(self) -> np.ndarray:
        return self.sigma_sq[1:] if self.has_energy_axis else self.sigma_sq

    def energy_precision(self) -> np.ndarray:
        """Amplitude precision over (dE3, dE4): sum constraint plus per-leg on-shell spread."""
        a = 1.0 / self.sigma_E_sq
        b = 1.0 / self.sigma_leg_sq
        return np.array([[a + b, a], [a, a + b]])

    def energy_correlation(self) -> float:
        """Correlation coefficient of (dE3, dE4) under |amplitude|^2."""
        cov = np.linalg.inv(self.energy_precision())
        return float(cov[0, 1] / np.sqrt(cov[0, 0] * cov[1, 1]))


def _momentum_sigma(phi: Gaussian4) -> np.ndarray:
    return phi.to_momentum().Sigma


def gtf_scatter(model: AbcModel, phi1: Gaussian4, phi2: Gaussian4, theta: float = np.pi / 2,
                mode: str = "tqm") -> OutgoingCloud:
    """Stick-and-cloud scattering of two packets.

    Plane-wave kinematics of the packet centers give the outgoing centers; the
    outgoing momentum-space dispersion on each axis is the sum of the incoming
    ones (Gaussian convolution).
    """
    if mode not in ("sqm", "tqm"):
        raise InputError("mode must be 'sqm' or 'tqm'")
    event = ScatterEvent(phi1.p0, phi2.p0, theta)
    sig1, sig2 = _momentum_sigma(phi1), _momentum_sigma(phi2)
    for phi, sig in ((phi1, sig1), (phi2, sig2)):
        d = np.diag(sig)
        if np.any(d <= 0):
            raise ZeroDispersionError("zero-dispersion input packet")
        pmag = np.sqrt(phi.p0.p3_sq)
        refs = np.array([phi.p0.E, pmag, pmag, pmag])
        if np.any(np.sqrt(d) >= NARROW_BEAM_RATIO * refs):
            raise NarrowBeamError("packet dispersion violates the narrow-beam condition sigma/|p| < 0.1")
    cov = sig1 + sig2
    axes = slice(0, 4) if mode == "tqm" else slice(1, 4)
    sigma_sq = np.diag(cov)[axes].copy()
    p3, q4 = event.outgoing()
    k_sq = event.exchanged_momentum_sq()
    if k_sq + model.mu**2 == 0:
        raise PoleError("forward scattering with massless exchange")
    legs = (phi1.p0.E, phi2.p0.E, p3.E, q4.E)
    s_bar = np.prod([np.sqrt(model.m / e) for e in legs]) * 1j / (k_sq + model.mu**2)
    # on-shell energy spread of one outgoing leg, from its momentum spread along the flight line
    n = p3.p3 / np.linalg.norm(p3.p3)
    v = np.linalg.norm(p3.p3) / p3.E
    sigma_leg_sq = float(v**2 * (n @ cov[1:, 1:] @ n))
    return OutgoingCloud(sigma_sq, p3, q4, complex(s_bar), mode, sigma_leg_sq, cov[axes, axes].copy())


def outgoing_time_correlation(cloud: OutgoingCloud):
    """Joint density over (dt3, dt4) leaving the interaction zone.

    Returns a callable rho(dt3, dt4) = exp(-dt^T Q dt) with
    Q = sigma_E^2 [[1, -r], [-r, 1]] and r the energy correlation coefficient,
    so that at dt4 = 0 the A leg follows exp(-sigma_E^2 dt3^2) and its mean
    shifts opposite to an early or late C leg.
    """
    if not cloud.has_energy_axis:
        raise InputError("cloud has no energy axis")
    s2 = cloud.sigma_E_sq
    r = cloud.energy_correlation()
    q = s2 * np.array([[1.0, -r], [-r, 1.0]])

    def density(dt3, dt4):
        dt3, dt4 = np.asarray(dt3, dtype=float), np.asarray(dt4, dtype=float)
        return np.exp(-(q[0, 0] * dt3**2 + 2 * q[0, 1] * dt3 * dt4 + q[1, 1] * dt4**2))

    density.Q = q
    density.sigma_t_sq = 1.0 / s2
    return density


def time_correlation_matrix(cloud: OutgoingCloud) -> np.ndarray:
    return outgoing_time_correlation(cloud).Q


def slit_in_time_prediction(gate_sigma_E: float, probe: Gaussian4, tau_bar: float,
                            E_bar: float) -> tuple[float, float]:
    """Post-gate coordinate-time width and detector-plane time spread of the probe."""
    if tau_bar <= 0:
        raise InputError("tau_bar must be positive")
    if E_bar <= 0:
        raise InputError("E_bar must be positive")
    probe_sigma_E_sq = float(_momentum_sigma(probe)[0, 0])
    total = gate_sigma_E**2 + probe_sigma_E_sq
    if np.isinf(total):
        return 0.0, float("inf")
    sigma_t_sq = 1.0 / total
    dt_sq = 0.5 * (sigma_t_sq + tau_bar**2 / (E_bar**2 * sigma_t_sq))
    return float(np.sqrt(sigma_t_sq)), float(np.sqrt(dt_sq))


def sqm_clipping_spread(gate_sigma_E: float, probe_clock_var: float) -> float:
    """SQM picture: the gate window (duration 1/sigma_E) truncates the probe's clock-time spread."""
    if probe_clock_var <= 0:
        raise InputError("probe clock-time variance must be positive")
    return float(np.sqrt(1.0 / (1.0 / probe_clock_var + 2.0 * gate_sigma_E**2)))


def slit_sweep(gate_sigmas, probe: Gaussian4, tau_bar: float, E_bar: float, probe_clock_var: float):
    """Rows of (sigma_E, dt_sqm, dt_tqm, signal) for a sweep over gate energy widths."""
    rows = []
    for s in gate_sigmas:
        _, dt_tqm = slit_in_time_prediction(float(s), probe, tau_bar, E_bar)
        dt_sqm = sqm_clipping_spread(float(s), probe_clock_var)
        signal = tqm_signal(dt_sqm**2 + dt_tqm**2, dt_sqm**2)
        rows.append((float(s), dt_sqm, dt_tqm, signal))
    return rows


def symmetrize(amp_t: complex, amp_u: complex, statistics: str) -> complex:
    if statistics == "boson":
        return amp_t + amp_u
    if statistics == "fermion":
        return amp_t - amp_u
    raise InputError("statistics must be 'boson' or 'fermion'")


def vertex_counting() -> Fraction:
    """Four emitter/absorber assignments times two vertex factors of 1/2."""
    return 4 * Fraction(1, 2) ** 2


def clock_energy_delta(x, T: float):
    """sin(x T)/(pi x): the finite clock-time window version of delta(x)."""
    x = np.asarray(x, dtype=float)
    return T / np.pi * np.sinc(x * T / np.pi)


def detector_velocity(L: float, arrival_time: float) -> float:
    """Velocity inferred from a flight path and an arrival time (clock or coordinate)."""
    if arrival_time <= 0:
        raise InputError("arrival time must be positive")
    return L / arrival_time


# QED trees in the narrow-beam approximation

# per process: leg masses in units of the fermion mass, exchanged momentum of each
# channel as signed leg combinations, and whether the propagator is a massive fermion
PROCESSES = {
    "moller": ((1, 1, 1, 1), {"t": (1, 0, -1, 0), "u": (1, 0, 0, -1)}, 0),
    "bhabha": ((1, 1, 1, 1), {"s": (1, 1, 0, 0), "t": (1, 0, -1, 0)}, 0),
    "compton": ((1, 0, 1, 0), {"s": (1, 1, 0, 0), "u": (1, 0, 0, -1)}, 1),
}


@dataclass(frozen=True)
class ChannelMap:
    process: str
    s: float
    t: float
    u: float
    sqm: dict
    tqm: dict
    first_order: dict
    shift: dict

    def relative_deviation(self) -> dict:
        return {c: abs(self.tqm[c] - self.sqm[c]) / abs(self.sqm[c]) for c in self.sqm}

    def tqm_mean(self, sigma_dE) -> dict:
        """Denominators averaged over independent Gaussian quantum energies per leg."""
        sig = np.broadcast_to(np.asarray(sigma_dE, dtype=float), (4,))
        out = {}
        for c, coeffs in PROCESSES[self.process][1].items():
            out[c] = self.sqm[c] + float(np.sum((np.asarray(coeffs) * sig) ** 2))
        return out


def qed_channel_map(process: str, momenta, m: float, delta_E=(0.0, 0.0, 0.0, 0.0),
                    narrow_tol: float = 1e-9) -> ChannelMap:
    """Mandelstam invariants and propagator denominators for a 2 -> 2 QED tree.

    ``momenta`` are the on-shell external legs (p1, p2 in; p3, p4 out).  The TQM
    denominators shift each leg energy by its quantum energy ``delta_E``; the
    difference from SQM is first order 2 K0 D0 plus second order D0^2 where K0
    is the exchanged energy and D0 the signed sum of the shifts.
    """
    if process not in PROCESSES:
        raise InputError(f"unknown process {process!r}")
    legs = [p if isinstance(p, FourMomentum) else FourMomentum.from_array(p) for p in momenta]
    if len(legs) != 4:
        raise InputError("need four external momenta")
    masses, channels, massive_prop = PROCESSES[process]
    for p, k in zip(legs, masses):
        if abs(p.off_shell(k * m)) > narrow_tol * max(p.E**2, m**2):
            raise InputError("external legs must be on shell")
    arr = [p.as_array() for p in legs]
    incoming, outgoing = arr[0] + arr[1], arr[2] + arr[3]
    if not np.allclose(incoming, outgoing, rtol=1e-9, atol=1e-12 * max(1.0, np.abs(incoming).max())):
        raise InputError("four-momentum not conserved")
    s = minkowski_dot(arr[0] + arr[1], arr[0] + arr[1])
    t = minkowski_dot(arr[0] - arr[2], arr[0] - arr[2])
    u = minkowski_dot(arr[0] - arr[3], arr[0] - arr[3])
    d = np.asarray(delta_E, dtype=float)
    prop_m2 = (m * m) if massive_prop else 0.0
    sqm, tqm, first, shift = {}, {}, {}, {}
    for c, coeffs in channels.items():
        coeffs = np.asarray(coeffs, dtype=float)
        K = sum(cf * a for cf, a in zip(coeffs, arr))
        dS = minkowski_dot(K, K) - prop_m2
        if abs(dS) <= DEFAULT_TOL.abs_tol * max(1.0, s):
            raise PoleError(f"{process} {c}-channel pole")
        d0 = float(coeffs @ d)
        Kt = K.copy()
        Kt[0] += d0
        sqm[c] = dS
        tqm[c] = minkowski_dot(Kt, Kt) - prop_m2
        first[c] = 2.0 * K[0] * d0
        shift[c] = d0
    return ChannelMap(process, s, t, u, sqm, tqm, first, shift)


def cm_momenta(process: str, m: float, p: float, theta: float):
    """Elastic center-of-mass legs with momentum magnitude ``p`` along z, scattered by theta in the x-z plane."""
    if process not in PROCESSES:
        raise InputError(f"unknown process {process!r}")
    masses = PROCESSES[process][0]
    n_in = np.array([0.0, 0.0, 1.0])
    n_out = np.array([np.sin(theta), 0.0, np.cos(theta)])
    vecs = (p * n_in, -p * n_in, p * n_out, -p * n_out)
    return [FourMomentum.on_shell(k * m, v) for k, v in zip(masses, vecs)]


def narrow_beam_spinor_deviation(p: FourMomentum, deltaE: float, m: float | None = None) -> float:
    """Largest relative change of a u-spinor component when E_p -> E_p + deltaE."""
    if m is None:
        m = float(np.sqrt(p.mass_sq()))
    e_p = on_shell_energy(m, p.p3)
    if abs(deltaE) >= 0.3 * (e_p + m):
        raise InputError("|deltaE| must be below 0.3 (E_p + m)")
    on = FourMomentum(e_p, *p.p3)
    off = FourMomentum(e_p + deltaE, *p.p3)
    worst = 0.0
    for s in (1, 2):
        u_s = dirac_u(on, s, m)
        u_t = dirac_u(off, s, m)
        mask = np.abs(u_s) > 1e-12 * np.abs(u_s).max()
        worst = max(worst, float(np.max(np.abs(u_t[mask] - u_s[mask]) / np.abs(u_s[mask]))))
    return worst


def spinor_deviation_series(p: FourMomentum, deltaE: float, m: float | None = None) -> float:
    """Second-order series of narrow_beam_spinor_deviation in deltaE/(E_p + m)."""
    if m is None:
        m = float(np.sqrt(p.mass_sq()))
    a = on_shell_energy(m, p.p3) + m
    x = deltaE / a
    upper = abs(x / 2 - x**2 / 8)
    has_lower = p.p3_sq > 0
    lower = abs(-x / 2 + 3 * x**2 / 8) if has_lower else 0.0
    return max(upper, lower)
