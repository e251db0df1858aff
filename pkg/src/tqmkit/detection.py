"""Time-of-arrival distributions: SQM clock-time spread, TQM coordinate-time part, and their sum."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError, ModelInconsistencyError, ZeroDispersionError
from .gtf import Gaussian1
from .io import write_csv, write_json
from .units import DEFAULT_TOL

KINDS = ("sqm", "tqm_time_part", "total")


@dataclass(frozen=True)
class ArrivalDistribution:
    """Arrival-time density; analytic Gaussian unless ``grid``/``values`` hold a sampled histogram."""

    mean: float
    variance: float
    kind: str
    grid: np.ndarray | None = None
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown distribution kind {self.kind!r}")
        if self.variance < 0:
            raise InputError("variance must be non-negative")
        if (self.grid is None) != (self.values is None):
            raise InputError("sampled distributions need both grid and values")
        if self.grid is not None:
            if np.any(self.values < 0):
                raise InputError("density must be non-negative")
            if self.grid.shape != self.values.shape or self.grid.ndim != 1 or self.grid.size < 2:
                raise InputError("grid and values must be matching 1D arrays")

    @classmethod
    def from_samples(cls, grid, values, kind: str) -> "ArrivalDistribution":
        """Normalize a sampled density on a uniform grid and read its moments off the samples."""
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        dt = _spacing(grid)
        total = values.sum() * dt
        if not total > 0:
            raise InputError("sampled density has no weight")
        values = values / total
        mean = float(np.sum(grid * values) * dt)
        var = float(np.sum((grid - mean) ** 2 * values) * dt)
        return cls(mean, var, kind, grid, values)

    @property
    def is_sampled(self) -> bool:
        return self.grid is not None

    @property
    def std(self) -> float:
        return float(np.sqrt(self.variance))

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        if self.is_sampled:
            return np.interp(t, self.grid, self.values, left=0.0, right=0.0)
        if self.variance == 0:
            raise ZeroDispersionError("degenerate distribution has no density")
        return np.exp(-((t - self.mean) ** 2) / (2 * self.variance)) / np.sqrt(2 * np.pi * self.variance)

    def sample_on(self, grid) -> "ArrivalDistribution":
        return ArrivalDistribution.from_samples(grid, self.pdf(grid), self.kind)

    def normalization(self) -> float:
        if not self.is_sampled:
            return 1.0
        return float(self.values.sum() * _spacing(self.grid))

    def metadata(self) -> dict:
        return {"mean": self.mean, "variance": self.variance, "kind": self.kind, "sampled": self.is_sampled}


def _spacing(grid: np.ndarray) -> float:
    d = np.diff(grid)
    if not np.allclose(d, d[0], rtol=1e-9, atol=0) or d[0] <= 0:
        raise InputError("sampled densities need a uniform increasing grid")
    return float(d[0])


def arrival_velocity(p0: float, m: float, relativistic: bool = True) -> float:
    if p0 <= 0:
        raise InputError("p0 must be positive for the packet to reach the detector")
    if m < 0:
        raise InputError("mass must be non-negative")
    if relativistic:
        return p0 / float(np.hypot(m, p0))
    if m == 0:
        raise InputError("nonrelativistic velocity needs m > 0")
    return p0 / m


def sqm_arrival(packet: Gaussian1, L: float, p0: float | None = None, m: float = 1.0,
                relativistic: bool = True, near_field: bool = False) -> ArrivalDistribution:
    """Clock-time arrival distribution at distance ``L`` downstream of the packet center.

    Far field: sigma_tau = taubar / (m v0 sigma_x) and variance sigma_tau^2 / 2.
    ``near_field`` keeps the initial width: variance = Delta x(taubar)^2 / v0^2.
    """
    if packet.axis == "time" or packet.representation != "coordinate":
        raise InputError("sqm_arrival expects a coordinate-space packet")
    if L <= 0:
        raise InputError("L must be positive")
    if m <= 0:
        raise InputError("m must be positive")
    p0 = packet.mean_conjugate if p0 is None else p0
    v0 = arrival_velocity(p0, m, relativistic)
    tau_bar = L / v0
    sigma_x_sq = packet.sigma_sq.real
    if near_field:
        var = 0.5 * (sigma_x_sq + tau_bar**2 / (m**2 * sigma_x_sq)) / v0**2
    else:
        sigma_tau = tau_bar / (m * v0 * np.sqrt(sigma_x_sq))
        var = sigma_tau**2 / 2
    return ArrivalDistribution(tau_bar, float(var), "sqm")


def tqm_time_part(packet: Gaussian1, tau_bar: float, m: float | None = None,
                  E0: float | None = None) -> ArrivalDistribution:
    """Coordinate-time spread accumulated over ``tau_bar``; width tau_bar/(m sigma_t) in the far field.

    For massless particles pass ``E0`` instead of ``m``.
    """
    if packet.axis != "time" or packet.representation != "coordinate":
        raise InputError("tqm_time_part expects a coordinate-time packet")
    if tau_bar < 0:
        raise InputError("tau_bar must be non-negative")
    mass = m if m else E0
    if mass is None or mass <= 0:
        raise InputError("need a positive m (or E0 for massless particles)")
    sigma_t_sq = packet.sigma_sq.real
    if sigma_t_sq <= 0:
        raise ZeroDispersionError("sigma_t must be positive")
    var = 0.5 * (sigma_t_sq + tau_bar**2 / (mass**2 * sigma_t_sq))
    return ArrivalDistribution(packet.center + tau_bar, float(var), "tqm_time_part")


def far_field_sigma_t(tau_bar: float, mass: float, sigma_t: float) -> float:
    return tau_bar / (mass * sigma_t)


def total_arrival(sqm: ArrivalDistribution, tqm_t: ArrivalDistribution) -> ArrivalDistribution:
    """Convolve the SQM distribution with the zero-mean TQM offset; variances add."""
    if not sqm.is_sampled and not tqm_t.is_sampled:
        return ArrivalDistribution(sqm.mean, sqm.variance + tqm_t.variance, "total")
    a = sqm if sqm.is_sampled else None
    b = tqm_t if tqm_t.is_sampled else None
    dt = _spacing((a or b).grid)
    if a is None:
        a = _auto_sample(sqm, dt)
    if b is None:
        b = _auto_sample(tqm_t, dt)
    if not np.isclose(_spacing(a.grid), _spacing(b.grid), rtol=1e-9, atol=0):
        raise InputError("sampled distributions have incompatible grid spacings")
    conv = np.convolve(a.values, b.values) * dt
    start = a.grid[0] + (b.grid[0] - tqm_t.mean)
    grid = start + dt * np.arange(conv.size)
    return ArrivalDistribution.from_samples(grid, conv, "total")


def _auto_sample(dist: ArrivalDistribution, dt: float, span: float = 12.0) -> ArrivalDistribution:
    half = max(span * dist.std, dt)
    n = int(np.ceil(half / dt))
    grid = dist.mean + dt * np.arange(-n, n + 1)
    return dist.sample_on(grid)


def tqm_signal(total_var: float, sqm_var: float, abs_tol: float | None = None) -> float:
    """Arrival-time variance not accounted for by SQM."""
    tol = (DEFAULT_TOL.abs_tol if abs_tol is None else abs_tol) + DEFAULT_TOL.rel_tol * abs(sqm_var)
    diff = total_var - sqm_var
    if diff < -tol:
        raise ModelInconsistencyError(f"total variance {total_var} below SQM variance {sqm_var}")
    return max(diff, 0.0)


def export_distribution(dist: ArrivalDistribution, csv_path, grid=None, extra: dict | None = None) -> Path:
    """Write (t, rho) rows and a JSON sidecar with the moments."""
    if grid is None:
        grid = dist.grid if dist.is_sampled else dist.mean + dist.std * np.linspace(-6, 6, 241)
    grid = np.asarray(grid, dtype=float)
    path = write_csv(csv_path, ["t", "rho"], zip(grid, dist.pdf(grid)))
    meta = dist.metadata()
    meta.update(extra or {})
    write_json(Path(path).with_suffix(".json"), meta)
    return path
