"""Free kernels and a split-step spectral solver for the FS/T equation.

Fields are stored as envelopes: on each axis the packet's mean conjugate
momentum (the carrier) is factored out, so grids only need to resolve the
Gaussian envelope.  The time axis may also run in a comoving frame, where
the stored coordinate is t - v tau.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import fft as sfft

from .errors import FluxError, InputError
from .gtf import AXES, Gaussian1, axis_sign
from .io import write_csv, write_json
from .parallel import thread_count

AXIS_NAMES = ("t", "x", "y", "z")
_AXIS_LONG = dict(zip(AXIS_NAMES, AXES))


# ------------------------------------------------------------------ kernels


def kernel_axis(delta, tau: float, m: float, axis: str) -> np.ndarray:
    """One-axis factor of the free coordinate kernel; four of these times exp(-i m tau / 2) give the 4D kernel."""
    if tau == 0:
        raise InputError("the kernel at tau = 0 is a delta function")
    s = -axis_sign(_AXIS_LONG.get(axis, axis))  # +1 on time, -1 on space
    delta = np.asarray(delta, dtype=float)
    norm = np.sqrt(s * 1j * m / (2.0 * np.pi * tau) + 0j)
    return norm * np.exp(-1j * s * m * delta**2 / (2.0 * tau))


def kernel_coordinate(x, x0, tau: float, m: float) -> complex:
    """-i m^2/(4 pi^2 tau^2) exp(-(i m / 2 tau)(x - x0)^2 - i m tau / 2), Minkowski square."""
    if tau == 0:
        raise InputError("the kernel at tau = 0 is a delta function; use the delta identity")
    if m <= 0:
        raise InputError("mass must be positive")
    d = np.asarray(x, dtype=float) - np.asarray(x0, dtype=float)
    sq = d[..., 0] ** 2 - np.sum(d[..., 1:] ** 2, axis=-1)
    val = -1j * m**2 / (4.0 * np.pi**2 * tau**2) * np.exp(-0.5j * m * sq / tau - 0.5j * m * tau)
    return complex(val) if np.ndim(val) == 0 else val


def kernel_momentum(p, tau: float, m: float):
    """Momentum-space kernel exp(i tau (p^2 - m^2) / 2m)."""
    p = np.asarray(p, dtype=float)
    sq = p[..., 0] ** 2 - np.sum(p[..., 1:] ** 2, axis=-1)
    return np.exp(0.5j * tau * (sq - m * m) / m)


# --------------------------------------------------------------------- grid


@dataclass(frozen=True)
class Axis:
    """Periodic axis with ``n`` points on [lo, hi)."""

    name: str
    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise InputError(f"unknown axis {self.name!r}")
        if self.n < 2 or self.n & (self.n - 1):
            raise InputError("axis point counts must be powers of two")
        if not self.hi > self.lo:
            raise InputError("axis range must be increasing")

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / self.n

    @property
    def coords(self) -> np.ndarray:
        return self.lo + self.spacing * np.arange(self.n)

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * sfft.fftfreq(self.n, self.spacing)

    @property
    def sign(self) -> int:
        """+1 where the physical conjugate is carrier + wavenumber, -1 on time (E = carrier - wavenumber)."""
        return axis_sign(_AXIS_LONG[self.name])


@dataclass(frozen=True)
class Grid4:
    """Envelope of psi_tau on a (t, x, y[, z]) subset of axes.

    psi(u) = exp(i sum_j s_j c_j u_j) * values(t - frame_velocity * tau, x, ...)
    with s_j the axis sign and c_j the carrier.
    """

    axes: tuple[Axis, ...]
    values: np.ndarray
    tau: float = 0.0
    carrier: tuple[float, ...] = ()
    frame_velocity: float = 0.0

    def __post_init__(self):
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names) or names != sorted(names, key=AXIS_NAMES.index):
            raise InputError("axes must be distinct and ordered t, x, y, z")
        shape = tuple(a.n for a in self.axes)
        if self.values.shape != shape:
            raise InputError(f"values shape {self.values.shape} does not match axes {shape}")
        if not self.carrier:
            object.__setattr__(self, "carrier", (0.0,) * len(self.axes))
        if len(self.carrier) != len(self.axes):
            raise InputError("one carrier per axis")
        if self.frame_velocity and "t" not in names:
            raise InputError("a comoving frame needs a time axis")

    @classmethod
    def from_gaussians(cls, axes: Sequence[Axis], packets: Sequence[Gaussian1], comoving_velocity: float = 0.0,
                       demodulate: bool = True) -> "Grid4":
        """Product GTF sampled on the grid and normalized to the discrete norm."""
        if len(axes) != len(packets):
            raise InputError("one Gaussian factor per axis")
        vals = np.ones((), dtype=complex)
        carrier = []
        for ax, g in zip(axes, packets):
            if g.representation != "coordinate" or g.axis != _AXIS_LONG[ax.name]:
                raise InputError(f"packet for axis {ax.name} must be a coordinate-space {_AXIS_LONG[ax.name]} GTF")
            c = g.mean_conjugate if demodulate else 0.0
            u = ax.coords
            f = g.amplitude(u) * np.exp(-1j * ax.sign * c * u)
            vals = np.multiply.outer(vals, f)
            carrier.append(float(c))
        grid = cls(tuple(axes), np.asarray(vals, dtype=complex), 0.0, tuple(carrier), comoving_velocity)
        return grid.normalized()

    # geometry ---------------------------------------------------------
    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError as exc:
            raise InputError(f"grid has no {name} axis") from exc

    @property
    def cell(self) -> float:
        return float(np.prod([a.spacing for a in self.axes]))

    def _bshape(self, j: int) -> list[int]:
        shape = [1] * len(self.axes)
        shape[j] = self.axes[j].n
        return shape

    def coordinate(self, j: int) -> np.ndarray:
        """Physical coordinate along axis ``j``, broadcastable over the grid."""
        u = self.axes[j].coords
        if self.axes[j].name == "t":
            u = u + self.frame_velocity * self.tau
        return u.reshape(self._bshape(j))

    def wavenumber(self, j: int) -> np.ndarray:
        return self.axes[j].wavenumbers.reshape(self._bshape(j))

    def momentum(self, j: int) -> np.ndarray:
        """Physical conjugate (energy on the time axis) for each envelope wavenumber."""
        return self.carrier[j] + self.axes[j].sign * self.wavenumber(j)

    def coords_dict(self) -> dict[str, np.ndarray]:
        return {a.name: self.coordinate(j) for j, a in enumerate(self.axes)}

    # moments ----------------------------------------------------------
    def norm(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.cell)

    def normalized(self) -> "Grid4":
        n = self.norm()
        if not n > 0:
            raise InputError("cannot normalize an empty field")
        return replace(self, values=self.values / math.sqrt(n))

    def _marginal(self, j: int, dens: np.ndarray) -> np.ndarray:
        other = tuple(k for k in range(dens.ndim) if k != j)
        return dens.sum(axis=other)

    def moments(self, name: str) -> tuple[float, float]:
        """Mean and variance of the coordinate density along ``name``."""
        j = self.index(name)
        w = self._marginal(j, np.abs(self.values) ** 2)
        u = self.coordinate(j).ravel()
        mean = float(np.sum(w * u) / w.sum())
        return mean, float(np.sum(w * (u - mean) ** 2) / w.sum())

    def momentum_moments(self, name: str) -> tuple[float, float]:
        j = self.index(name)
        spec = sfft.fft(self.values, axis=j, workers=thread_count())
        w = self._marginal(j, np.abs(spec) ** 2)
        p = self.momentum(j).ravel()
        mean = float(np.sum(w * p) / w.sum())
        return mean, float(np.sum(w * (p - mean) ** 2) / w.sum())


# ----------------------------------------------------------------- fields


FieldFn = Callable[[dict], np.ndarray]


@dataclass(frozen=True)
class EMField:
    """Static potentials as callables of the coordinate dict {'t': ..., 'x': ..., ...}."""

    q: float = 1.0
    phi: FieldFn | None = None
    A: dict[str, FieldFn] = field(default_factory=dict)
    description: dict = field(default_factory=dict)

    @classmethod
    def uniform_B(cls, B: float, q: float = 1.0) -> "EMField":
        """B along z in the symmetric gauge A = (-B y / 2, B x / 2, 0)."""
        return cls(q, None, {"x": lambda c: -0.5 * B * c["y"], "y": lambda c: 0.5 * B * c["x"]},
                   {"kind": "uniform_B", "B": B, "q": q})

    @classmethod
    def constant_phi(cls, phi: float, q: float = 1.0) -> "EMField":
        return cls(q, lambda c: np.full(np.broadcast(*c.values()).shape, phi), {},
                   {"kind": "constant_phi", "phi": phi, "q": q})

    @property
    def is_null(self) -> bool:
        return self.phi is None and not self.A


def _eval_component(fn: FieldFn | None, grid: Grid4, along: int) -> np.ndarray | float:
    """Potential component on the grid; must not vary along the axis it pairs with."""
    if fn is None:
        return 0.0
    coords = grid.coords_dict()
    val = np.broadcast_to(np.asarray(fn(coords), dtype=float), grid.values.shape)
    if not np.all(np.isfinite(val)):
        raise InputError("field values must be finite")
    spread = np.ptp(val, axis=along)
    if np.any(spread > 1e-12 * max(1.0, float(np.abs(val).max()))):
        raise InputError(f"potential paired with axis {grid.axes[along].name} varies along that axis")
    return np.take(val, [0], axis=along)


# ------------------------------------------------------------------ steps


def _kinetic_axis(grid: Grid4, j: int, dtau: float, m: float, shift) -> np.ndarray:
    """Exponent of the one-axis factor, in the (axis j Fourier, others coordinate) representation."""
    p = grid.momentum(j)
    name = grid.axes[j].name
    if name == "t":
        expo = (p - shift) ** 2 / (2.0 * m) + grid.frame_velocity * grid.wavenumber(j)
    else:
        expo = -((p - shift) ** 2) / (2.0 * m)
    return dtau * expo


def _apply_axis(values: np.ndarray, j: int, expo: np.ndarray) -> np.ndarray:
    w = thread_count()
    spec = sfft.fft(values, axis=j, workers=w)
    spec *= np.exp(1j * expo)
    return sfft.ifft(spec, axis=j, workers=w)


def _check_step(grid: Grid4, m: float):
    if m <= 0:
        raise InputError("FS/T mass must be positive")
    if not np.all(np.isfinite(grid.values)):
        raise InputError("grid values must be finite")


def fst_free_step(grid: Grid4, dtau: float, m: float, clock_phase: bool = True) -> Grid4:
    """Multiply the spectrum by exp(i dtau (p^2 - m^2) / 2m); exactly unitary."""
    _check_step(grid, m)
    if dtau == 0:
        return grid
    expo = 0.0
    for j in range(len(grid.axes)):
        expo = expo + _kinetic_axis(grid, j, dtau, m, 0.0)
    if clock_phase:
        expo = expo - 0.5 * m * dtau
    w = thread_count()
    spec = sfft.fftn(grid.values, workers=w)
    spec *= np.exp(1j * expo)
    return replace(grid, values=sfft.ifftn(spec, workers=w), tau=grid.tau + dtau)


def fst_potential_step(grid: Grid4, em: EMField, dtau: float, m: float, clock_phase: bool = True) -> Grid4:
    """Strang-split step with minimal substitution E -> E - q Phi, p_j -> p_j - q A_j.

    Each axis factor is diagonal when that axis is in Fourier space and the
    rest in coordinates, provided the paired potential does not vary along
    it.  Order: outer axes half steps, time axis (or innermost) full step.
    """
    _check_step(grid, m)
    if em.is_null:
        return fst_free_step(grid, dtau, m, clock_phase)
    if dtau == 0:
        return grid
    shifts = []
    for j, ax in enumerate(grid.axes):
        fn = em.phi if ax.name == "t" else em.A.get(ax.name)
        comp = _eval_component(fn, grid, j)
        shifts.append(em.q * comp)
    order = list(range(len(grid.axes)))
    vals = grid.values
    for j in reversed(order[1:]):
        vals = _apply_axis(vals, j, _kinetic_axis(grid, j, 0.5 * dtau, m, shifts[j]))
    vals = _apply_axis(vals, order[0], _kinetic_axis(grid, order[0], dtau, m, shifts[order[0]]))
    for j in order[1:]:
        vals = _apply_axis(vals, j, _kinetic_axis(grid, j, 0.5 * dtau, m, shifts[j]))
    if clock_phase:
        vals = vals * np.exp(-0.5j * m * dtau)
    return replace(grid, values=vals, tau=grid.tau + dtau)


def evolve(grid: Grid4, em: EMField | None, dtau: float, steps: int, m: float, clock_phase: bool = True) -> Grid4:
    step = fst_free_step if em is None or em.is_null else None
    for _ in range(steps):
        grid = step(grid, dtau, m, clock_phase) if step else fst_potential_step(grid, em, dtau, m, clock_phase)
    return grid


# --------------------------------------------------------- sponge and flux


def sponge_mask(axis: Axis, width: float, strength: float, dtau: float) -> np.ndarray:
    """Per-step damping exp(-strength dtau r^2), r ramping 0 -> 1 across ``width`` at both edges."""
    u = axis.coords
    lo = np.clip((axis.lo + width - u) / width, 0.0, 1.0)
    hi = np.clip((u - (axis.hi - width)) / width, 0.0, 1.0)
    r = np.maximum(lo, hi)
    return np.exp(-strength * dtau * r**2)


def current_through_plane(grid: Grid4, em: EMField | None, m: float, axis: str, index: int) -> np.ndarray:
    """Probability current Re(psi^* (p - q A) psi) / m across the plane ``axis`` = coords[index]."""
    j = grid.index(axis)
    w = thread_count()
    vals = grid.values
    deriv = sfft.ifft(sfft.fft(vals, axis=j, workers=w) * (1j * grid.wavenumber(j)), axis=j, workers=w)
    shift = 0.0
    if em is not None and axis in em.A:
        shift = em.q * np.asarray(em.A[axis](grid.coords_dict()), dtype=float)
        shift = np.broadcast_to(shift, vals.shape)
        shift = np.take(shift, index, axis=j)
    psi = np.take(vals, index, axis=j)
    dpsi = np.take(deriv, index, axis=j)
    return (np.conj(psi) * ((grid.carrier[j] - shift) * psi - 1j * dpsi)).real / m


# -------------------------------------------------------------- sword trace


@dataclass(frozen=True)
class SwordConfig:
    """Charged packet launched along +x towards a detector plane at x = x0 + L in a uniform B along z.

    ``sigma_*`` are GTF amplitude widths (density std = sigma / sqrt 2).
    ``mass_mode`` picks the FS/T mass: the rest mass or the mean energy.
    """

    energy: float = 100.0
    p0: float = 20.0
    sigma_x: float = 1.7677669529663689
    sigma_y: float = 1.7677669529663689
    sigma_t: float = 4.0
    B: float = 0.0
    q: float = 1.0
    L: float = 60.0
    mass_mode: str = "energy"
    x_range: tuple[float, float] = (-16.0, 112.0)
    y_range: tuple[float, float] = (-16.0, 16.0)
    t_half_width: float = 16.0
    x_points: int = 256
    y_points: int = 64
    t_points: int = 32
    dtau: float = 2.0
    approach_dtau: float = 20.0
    max_steps: int = 2000
    sponge_width: float = 12.0
    sponge_strength: float = 0.5
    y_bins: int = 16
    t_bins: int = 64
    clock_phase: bool = True
    flux_target: float = 0.99

    def __post_init__(self):
        if not self.energy > self.p0 > 0:
            raise InputError("need energy > p0 > 0")
        if self.mass_mode not in ("energy", "rest"):
            raise InputError("mass_mode must be 'energy' or 'rest'")
        if min(self.sigma_x, self.sigma_y, self.sigma_t, self.dtau, self.L) <= 0:
            raise InputError("widths, dtau and L must be positive")
        if not self.x_range[0] < 0.0 < self.L < self.x_range[1] - self.sponge_width:
            raise InputError("detector plane must lie inside the x range, upstream of the sponge")
        if self.y_points % self.y_bins:
            raise InputError("y_bins must divide y_points")
        if self.q * self.B != 0 and abs(self.p0 / (self.q * self.B)) < self.L:
            raise InputError("orbit radius shorter than the flight path; packet never reaches the plane")

    @property
    def rest_mass(self) -> float:
        return math.sqrt(self.energy**2 - self.p0**2)

    @property
    def fst_mass(self) -> float:
        return self.energy if self.mass_mode == "energy" else self.rest_mass

    @property
    def velocity(self) -> float:
        return self.p0 / self.fst_mass

    @property
    def tau_bar(self) -> float:
        return self.L / self.velocity

    def packets(self) -> dict[str, Gaussian1]:
        return {
            "t": Gaussian1(0.0, self.energy, self.sigma_t**2, "time"),
            "x": Gaussian1(0.0, self.p0, self.sigma_x**2, "x"),
            "y": Gaussian1(0.0, 0.0, self.sigma_y**2, "y"),
        }

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj) -> "SwordConfig":
        if isinstance(obj, (str, Path)):
            obj = json.loads(Path(obj).read_text())
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise InputError(f"unknown sword config keys: {sorted(unknown)}")
        kw = dict(obj)
        for key in ("x_range", "y_range"):
            if key in kw:
                kw[key] = tuple(float(v) for v in kw[key])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise InputError(str(exc)) from exc


@dataclass(frozen=True)
class SwordTrace:
    """Flux through the detector plane binned in (y, arrival time)."""

    mode: str
    y_edges: np.ndarray
    t_edges: np.ndarray
    histogram: np.ndarray
    weight: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    total_flux: float
    absorbed: float
    steps: int

    def populated(self, frac: float = 1e-3) -> np.ndarray:
        return self.weight > frac * self.weight.sum()

    def rows(self) -> list[tuple]:
        yc = 0.5 * (self.y_edges[:-1] + self.y_edges[1:])
        tc = 0.5 * (self.t_edges[:-1] + self.t_edges[1:])
        return [(float(y), float(t), float(self.histogram[i, k]))
                for i, y in enumerate(yc) for k, t in enumerate(tc)]

    def variance_rows(self) -> list[tuple]:
        yc = 0.5 * (self.y_edges[:-1] + self.y_edges[1:])
        return [(float(y), float(w), float(mu), float(v))
                for y, w, mu, v in zip(yc, self.weight, self.mean, self.variance)]


@dataclass(frozen=True)
class SwordReport:
    config: SwordConfig
    sqm: SwordTrace
    tqm: SwordTrace

    def comparison_rows(self) -> list[tuple]:
        yc = 0.5 * (self.sqm.y_edges[:-1] + self.sqm.y_edges[1:])
        return [(float(y), float(a), float(b), bool(p))
                for y, a, b, p in zip(yc, self.sqm.variance, self.tqm.variance,
                                      self.sqm.populated() & self.tqm.populated())]

    def export(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        paths = []
        for tr in (self.sqm, self.tqm):
            paths.append(write_csv(out / f"sword_{tr.mode}_hist.csv", ["y", "t", "density"], tr.rows()))
            paths.append(write_csv(out / f"sword_{tr.mode}_moments.csv", ["y", "weight", "mean_t", "var_t"],
                                   tr.variance_rows()))
        paths.append(write_csv(out / "sword_compare.csv", ["y", "var_sqm", "var_tqm", "populated"],
                               self.comparison_rows()))
        paths.append(write_json(out / "sword_config.json", self.config.to_json()))
        return paths


def _sword_grid(cfg: SwordConfig, mode: str) -> Grid4:
    pk = cfg.packets()
    axes = [Axis("x", *cfg.x_range, cfg.x_points), Axis("y", *cfg.y_range, cfg.y_points)]
    gs = [pk["x"], pk["y"]]
    v_t = 0.0
    if mode == "tqm":
        axes.insert(0, Axis("t", -cfg.t_half_width, cfg.t_half_width, cfg.t_points))
        gs.insert(0, pk["t"])
        v_t = cfg.energy / cfg.fst_mass
    return Grid4.from_gaussians(axes, gs, comoving_velocity=v_t)


def _approach_time(cfg: SwordConfig) -> float:
    # leading 8 sigma edge of the spreading packet reaches the plane
    m, s2 = cfg.fst_mass, cfg.sigma_x**2
    for tau in np.linspace(cfg.tau_bar, 0.0, 400):
        std = math.sqrt(0.5 * (s2 + (tau / (m * cfg.sigma_x)) ** 2))
        if cfg.velocity * tau + 8.0 * std <= cfg.L:
            return float(tau)
    return 0.0


def run_sword(cfg: SwordConfig, mode: str) -> SwordTrace:
    """Evolve one mode and accumulate the plane flux binned in (y, arrival time).

    SQM: (x, y) grid; arrival time is the clock time of the crossing.
    TQM: (t, x, y) grid; arrival time is the coordinate time at the crossing.
    """
    if mode not in ("sqm", "tqm"):
        raise InputError("mode must be 'sqm' or 'tqm'")
    m = cfg.fst_mass
    em = EMField.uniform_B(cfg.B, cfg.q) if cfg.B else None
    grid = _sword_grid(cfg, mode)
    jx = grid.index("x")
    xax = grid.axes[jx]
    ix = int(round((cfg.L - xax.lo) / xax.spacing))
    jy = grid.index("y")
    y_rows = grid.axes[jy].coords
    mask_shape = [1] * len(grid.axes)
    mask_shape[jx] = xax.n

    tau_ff = _approach_time(cfg)
    n_ff = int(tau_ff // cfg.approach_dtau)
    if n_ff:
        grid = evolve(grid, em, tau_ff / n_ff, n_ff, m, cfg.clock_phase)

    tau_ref = cfg.tau_bar
    sqm_std = math.sqrt(0.5 * (cfg.sigma_x**2 + (cfg.tau_bar / (m * cfg.sigma_x)) ** 2)) / cfg.velocity
    t_std = math.sqrt(0.5 * (cfg.sigma_t**2 + (cfg.tau_bar / (m * cfg.sigma_t)) ** 2)) if mode == "tqm" else 0.0
    half = 8.0 * math.hypot(sqm_std, t_std)
    t_edges = np.linspace(tau_ref - half, tau_ref + half, cfg.t_bins + 1)
    y_edges = np.linspace(cfg.y_range[0], cfg.y_range[1], cfg.y_bins + 1)
    hist = np.zeros((cfg.y_bins, cfg.t_bins))
    s0 = np.zeros(y_rows.size)
    s1 = np.zeros(y_rows.size)
    s2 = np.zeros(y_rows.size)
    mask = sponge_mask(xax, cfg.sponge_width, cfg.sponge_strength, cfg.dtau).reshape(mask_shape)
    absorbed = 0.0
    upstream = [slice(None)] * len(grid.axes)
    upstream[jx] = slice(0, ix)
    dy = grid.axes[jy].spacing
    steps = 0

    def record(g: Grid4, weight: float):
        flux = current_through_plane(g, em, m, "x", ix) * weight * dy
        if mode == "tqm":
            dt = g.axes[0].spacing
            t = (g.axes[0].coords + g.frame_velocity * g.tau)[:, None] - tau_ref
            flux = flux * dt
        else:
            t = np.array([[g.tau - tau_ref]])
            flux = flux[None, :]
        s0[:] += flux.sum(axis=0)
        s1[:] += (flux * t).sum(axis=0)
        s2[:] += (flux * t**2).sum(axis=0)
        tt = np.broadcast_to(t + tau_ref, flux.shape)
        yy = np.broadcast_to(y_rows[None, :], flux.shape)
        h, _, _ = np.histogram2d(yy.ravel(), tt.ravel(), bins=[y_edges, t_edges], weights=flux.ravel())
        hist[:] += h

    record(grid, 0.5 * cfg.dtau)
    while steps < cfg.max_steps:
        grid = evolve(grid, em, cfg.dtau, 1, m, cfg.clock_phase)
        before = grid.norm()
        grid = replace(grid, values=grid.values * mask)
        absorbed += before - grid.norm()
        steps += 1
        remaining = float(np.sum(np.abs(grid.values[tuple(upstream)]) ** 2) * grid.cell)
        if remaining < 1e-7:
            record(grid, 0.5 * cfg.dtau)
            break
        record(grid, cfg.dtau)
    total = float(s0.sum())
    if total < cfg.flux_target:
        raise FluxError(f"only {total:.4f} of the probability crossed the detector plane")
    group = y_rows.size // cfg.y_bins
    w = s0.reshape(cfg.y_bins, group).sum(axis=1)
    m1 = s1.reshape(cfg.y_bins, group).sum(axis=1)
    m2 = s2.reshape(cfg.y_bins, group).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(w > 0, m1 / w, np.nan)
        var = np.where(w > 0, m2 / w - mean**2, np.nan)
    dt_bin = t_edges[1] - t_edges[0]
    y_bin = y_edges[1] - y_edges[0]
    return SwordTrace(mode, y_edges, t_edges, hist / (dt_bin * y_bin), w, mean + tau_ref, var,
                      total, float(absorbed), steps)


def sword_trace(cfg: SwordConfig) -> SwordReport:
    """Run the SQM and TQM modes and report per-y-bin arrival-time variances."""
    return SwordReport(cfg, run_sword(cfg, "sqm"), run_sword(cfg, "tqm"))
