"""Fast invariant checks run by ``tqmkit selftest``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .detection import ArrivalDistribution, total_arrival
from .evolver import Axis, Grid4, evolve
from .gtf import Gaussian1, Gaussian4, free_evolve
from .loop import (LoopConfig, clock_frequency_modified, loop_fixed_tau, loop_fourier, loop_fourier_oracle,
                   loop_numeric_oracle, mass_correction)
from .merit import figure_of_merit
from .propagators import (GAMMA, IDENTITY4, bar, clock_frequency, dirac_u, dirac_v, photon_tqm, slash,
                          spin0_tqm_packed, spin0_unpacked)
from .scattering import AbcModel, ScatterEvent, exchanged_energy_tqm, gtf_scatter
from .units import METRIC, FourMomentum


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    error: float
    tolerance: float


def _gamma_algebra() -> tuple[float, float]:
    worst = max(np.abs(GAMMA[a] @ GAMMA[b] + GAMMA[b] @ GAMMA[a] - 2 * METRIC[a, b] * IDENTITY4).max()
                for a in range(4) for b in range(4))
    return worst, 1e-12


def _spinor_completeness() -> tuple[float, float]:
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(20):
        m = rng.uniform(0.2, 3.0)
        p = FourMomentum.on_shell(m, rng.normal(scale=2.0, size=3))
        uu = sum(np.outer(dirac_u(p, s, m), bar(dirac_u(p, s, m))) for s in (1, 2))
        vv = sum(np.outer(dirac_v(p, s, m), bar(dirac_v(p, s, m))) for s in (1, 2))
        worst = max(worst, np.abs(uu - (slash(p) + m * IDENTITY4) / (2 * m)).max(),
                    np.abs(vv - (slash(p) - m * IDENTITY4) / (2 * m)).max())
    return worst, 1e-10


def _photon_metric() -> tuple[float, float]:
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(20):
        k = FourMomentum(rng.uniform(0.2, 3.0), *rng.normal(size=3))
        w = rng.normal()
        sc = spin0_tqm_packed(w, k, 0.0, 1e-6).value
        worst = max(worst, np.abs(photon_tqm(w, k, 1e-6).value + METRIC * sc).max() / abs(sc))
    return worst, 1e-14


def _fourier_duality() -> tuple[float, float]:
    m, eps, tau = 1.0, 1e-7, 1.7
    k = FourMomentum(1.3, 0.4, -0.2, 0.5)
    varpi = clock_frequency(k, m)

    def fold(x, sign):
        return spin0_tqm_packed(varpi + x, k, m, eps).value + sign * spin0_tqm_packed(varpi - x, k, m, eps).value

    total = 0j
    for sign, weight, factor in ((1.0, "cos", 1.0), (-1.0, "sin", -1j)):
        re = integrate.quad(lambda x: fold(x, sign).real, 0, np.inf, weight=weight, wvar=tau, limlst=200)[0]
        im = integrate.quad(lambda x: fold(x, sign).imag, 0, np.inf, weight=weight, wvar=tau, limlst=200)[0]
        total += factor * (re + 1j * im)
    num = np.exp(-1j * varpi * tau) * total / (2 * np.pi)
    ref = spin0_unpacked(k, m, tau).value
    return abs(num - ref) / abs(ref), 1e-3


def _exchanged_energy() -> tuple[float, float]:
    rng = np.random.default_rng(13)
    model = AbcModel(1.0, 0.3, 1.0)
    worst = max(abs(exchanged_energy_tqm(model, ScatterEvent.on_shell(1.0, rng.normal(scale=3, size=3),
                                                                      rng.uniform(0, np.pi))))
                for _ in range(200))
    return worst, 1e-12


def _pythagorean_dispersion() -> tuple[float, float]:
    def packet(p3, s):
        p = FourMomentum.on_shell(1000.0, p3)
        return Gaussian4.diagonal(np.zeros(4), p, [s] * 4, rep="momentum")

    cloud = gtf_scatter(AbcModel(1000.0, 1.0, 1.0), packet([0, 0, 200.0], 3.0), packet([0, 0, -200.0], 4.0))
    return float(np.max(np.abs(np.sqrt(cloud.sigma_sq) - 5.0)) / 5.0), 1e-12


def _loop_value() -> tuple[float, float]:
    cfg = LoopConfig.at_rest(1.0, 0.1)
    res = loop_numeric_oracle(cfg, 5.0)
    return abs(res.value - loop_fixed_tau(cfg, 5.0)) / abs(loop_fixed_tau(cfg, 5.0)), 5e-2


def _loop_kink() -> tuple[float, float]:
    cfg = LoopConfig.at_rest(1.0, 0.1)
    w = clock_frequency_modified(cfg)
    worst = max(abs(loop_fourier_oracle(cfg, w + du) - loop_fourier(cfg, w + du)) / abs(loop_fourier(cfg, w + du))
                for du in (-1.0, 0.5))
    return worst, 2e-2


def _mass_correction() -> tuple[float, float]:
    cfg = LoopConfig.at_rest(1.0, 0.1)
    mc = mass_correction(cfg, 1e-2)
    return abs(mc.quadrature / mc.closed_form - 1), 2e-2


def _detection_additivity() -> tuple[float, float]:
    s = ArrivalDistribution(10.0, 9.0, "sqm")
    t = ArrivalDistribution(10.0, 16.0, "tqm_time_part")
    exact = abs(total_arrival(s, t).variance - 25.0)
    sampled = total_arrival(s.sample_on(np.arange(-30, 50, 0.01)), t)
    return max(exact, abs(sampled.variance / 25.0 - 1)), 1e-3


def _grid_concordance() -> tuple[float, float]:
    axes = [Axis("t", -16, 16, 64), Axis("x", -16, 16, 64), Axis("y", -16, 16, 64)]
    pk = [Gaussian1(0, 10.0, 1.2, "time"), Gaussian1(0, 1.5, 0.8, "x"), Gaussian1(0, 0.0, 1.0, "y")]
    g = evolve(Grid4.from_gaussians(axes, pk, comoving_velocity=1.0), None, 0.5, 8, 10.0)
    worst = abs(g.norm() - 1.0)
    for name, p in zip("txy", pk):
        worst = max(worst, abs(g.moments(name)[1] / free_evolve(p, 4.0, 10.0).variance - 1))
    return worst, 1e-3


def _figure_of_merit() -> tuple[float, float]:
    return abs(figure_of_merit(100_000, 1.0).M - 5.0), 1e-12


CHECKS: dict[str, Callable[[], tuple[float, float]]] = {
    "gamma_anticommutation": _gamma_algebra,
    "spinor_completeness": _spinor_completeness,
    "photon_metric_times_scalar": _photon_metric,
    "packed_unpacked_duality": _fourier_duality,
    "exchanged_energy_zero": _exchanged_energy,
    "pythagorean_dispersion": _pythagorean_dispersion,
    "loop_oracle_agreement": _loop_value,
    "loop_frequency_kink": _loop_kink,
    "mass_correction_scaling": _mass_correction,
    "detection_additivity": _detection_additivity,
    "grid_gtf_concordance": _grid_concordance,
    "figure_of_merit": _figure_of_merit,
}


def run_checks() -> list[CheckResult]:
    out = []
    for name, fn in CHECKS.items():
        err, tol = fn()
        out.append(CheckResult(name, bool(math.isfinite(err) and err <= tol), float(err), tol))
    return out
