"""End-to-end acceptance checks.

Each criterion prints one ``PASS``/``FAIL`` line with its worst measured
error and wall time, then asserts.  Run ``python3 tests/test_acceptance.py``
for the summary alone.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import pytest
from scipy import integrate

from tqmkit.detection import ArrivalDistribution, sqm_arrival, total_arrival, tqm_time_part
from tqmkit.evolver import Axis, Grid4, SwordConfig, evolve, sword_trace
from tqmkit.gtf import Gaussian1, Gaussian4, free_evolve, time_density
from tqmkit.loop import (LoopConfig, clock_frequency_modified, loop_fixed_tau, loop_fourier, loop_fourier_oracle,
                         loop_numeric_oracle, mass_correction)
from tqmkit.merit import figure_of_merit, merit_sweep
from tqmkit.propagators import (GAMMA, IDENTITY4, bar, clock_frequency, dirac_u, dirac_v, photon_tqm, slash,
                                spin0_tqm_packed, spin0_unpacked)
from tqmkit.scattering import AbcModel, ScatterEvent, exchanged_energy_tqm, gtf_scatter, slit_sweep
from tqmkit.units import METRIC, FourMomentum


@dataclass
class Outcome:
    passed: bool
    detail: str


def _line(number: int, title: str, outcome: Outcome, elapsed: float, budget: float) -> str:
    ok = outcome.passed and elapsed < budget
    timing = f"{elapsed:.2f}s/{budget:.0f}s"
    return f"{'PASS' if ok else 'FAIL'} criterion {number} {title}: {outcome.detail} [{timing}]"


# 1 -------------------------------------------------------------- propagators


def _packed_unpacked(k: FourMomentum, m: float, tau: float, eps: float = 1e-7) -> float:
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
    return abs(num - ref) / abs(ref)


def criterion_propagators() -> Outcome:
    rng = np.random.default_rng(101)
    anti = max(np.abs(GAMMA[a] @ GAMMA[b] + GAMMA[b] @ GAMMA[a] - 2 * METRIC[a, b] * IDENTITY4).max()
               for a in range(4) for b in range(4))
    comp = photon = 0.0
    for _ in range(50):
        m = rng.uniform(0.1, 5.0)
        p = FourMomentum.on_shell(m, rng.normal(scale=3.0, size=3))
        uu = sum(np.outer(dirac_u(p, s, m), bar(dirac_u(p, s, m))) for s in (1, 2))
        vv = sum(np.outer(dirac_v(p, s, m), bar(dirac_v(p, s, m))) for s in (1, 2))
        comp = max(comp, np.abs(uu - (slash(p) + m * IDENTITY4) / (2 * m)).max(),
                   np.abs(vv - (slash(p) - m * IDENTITY4) / (2 * m)).max())
        k = FourMomentum(rng.uniform(0.2, 3.0), *rng.normal(size=3))
        w = rng.normal()
        sc = spin0_tqm_packed(w, k, 0.0, 1e-6).value
        photon = max(photon, np.abs(photon_tqm(w, k, 1e-6).value + METRIC * sc).max() / abs(sc))
    dual = max(_packed_unpacked(FourMomentum(*k4), m, tau) for k4, m, tau in (
        ((1.3, 0.4, -0.2, 0.5), 1.0, 1.7),
        ((2.0, 0.1, 0.3, -0.6), 1.5, 0.8),
        ((0.9, 0.0, 0.0, 0.2), 0.7, 3.1),
    ))
    passed = anti < 1e-12 and comp < 1e-9 and photon < 1e-12 and dual < 1e-3
    return Outcome(passed, f"anticomm {anti:.1e}, completeness {comp:.1e}, photon {photon:.1e}, duality {dual:.1e}")


# 2 -------------------------------------------------------------- free packet


def criterion_free_packet() -> Outcome:
    mass, tau = 10.0, 20.0
    axes = [Axis(n, -24.0, 24.0, 128) for n in "txy"]
    pk = [Gaussian1(0.0, mass, 2.0, "time"), Gaussian1(0.0, 1.5, 2.0, "x"), Gaussian1(0.0, 0.0, 1.5, "y")]
    grid = Grid4.from_gaussians(axes, pk, comoving_velocity=1.0)
    product = math.sqrt(grid.moments("t")[1] * grid.momentum_moments("t")[1])
    evolved = evolve(grid, None, 2.0, 10, mass)
    worst = 0.0
    for name, g in zip("txy", pk):
        worst = max(worst, abs(evolved.moments(name)[1] / free_evolve(g, tau, mass).variance - 1))
    worst = max(worst, abs(evolved.moments("t")[1] / time_density(pk[0], tau, mass)[1] - 1))
    passed = worst < 1e-3 and abs(product - 0.5) < 1e-9
    return Outcome(passed, f"worst variance error {worst:.1e}, dt*dE - 1/2 = {product - 0.5:.1e}")


# 3 ---------------------------------------------------------- exchanged energy


def criterion_plane_wave() -> Outcome:
    rng = np.random.default_rng(103)
    worst = 0.0
    for _ in range(1000):
        m = rng.uniform(0.1, 10.0)
        model = AbcModel(m, rng.uniform(0.0, 2.0), 1.0)
        event = ScatterEvent.on_shell(m, rng.normal(scale=3 * m, size=3), rng.uniform(0.0, np.pi))
        worst = max(worst, abs(exchanged_energy_tqm(model, event)))
    return Outcome(worst < 1e-12, f"max |w| {worst:.1e} over 1000 events")


# 4 ---------------------------------------------------------- stick and cloud


def convolution_dispersion(s1_sq: float, s2_sq: float, n: int = 2**14) -> float:
    """Variance of the brute-force convolution of two off-center Gaussian profiles."""
    half = 12 * math.sqrt(s1_sq + s2_sq)
    x = np.linspace(-half, half, n)
    dx = x[1] - x[0]
    f = np.exp(-((x - 0.4 * math.sqrt(s1_sq)) ** 2) / (2 * s1_sq))
    g = np.exp(-((x + 0.9 * math.sqrt(s2_sq)) ** 2) / (2 * s2_sq))
    conv = np.convolve(f, g) * dx
    y = 2 * x[0] + dx * np.arange(conv.size)
    mean = np.sum(y * conv) / np.sum(conv)
    return float(np.sum((y - mean) ** 2 * conv) / np.sum(conv))


def criterion_stick_and_cloud() -> Outcome:
    m = 1000.0
    model = AbcModel(m, 1.0, 1.0)

    def packet(p3, sig):
        return Gaussian4.diagonal(np.zeros(4), FourMomentum.on_shell(m, p3), sig, rep="momentum")

    worst = 0.0
    for s1, s2 in (([3.0] * 4, [4.0] * 4), ([1.0, 2.5, 0.7, 3.3], [2.2, 0.4, 1.9, 5.0])):
        cloud = gtf_scatter(model, packet([0, 0, 200.0], s1), packet([0, 0, -200.0], s2))
        for i in range(4):
            oracle = convolution_dispersion(s1[i] ** 2, s2[i] ** 2)
            worst = max(worst, abs(cloud.sigma_sq[i] / oracle - 1))
    pyth = gtf_scatter(model, packet([0, 0, 200.0], [3.0] * 4), packet([0, 0, -200.0], [4.0] * 4))
    five = float(np.max(np.abs(np.sqrt(pyth.sigma_sq) - 5.0)))
    return Outcome(worst < 1e-6 and five < 1e-12, f"oracle error {worst:.1e}, |sigma3 - 5| {five:.1e}")


# 5 ----------------------------------------------------------------- loop


def criterion_loop() -> Outcome:
    rest = LoopConfig.at_rest(1.0, 0.1)
    moving = LoopConfig(1.0, 0.1, FourMomentum.on_shell(1.0, [0.15, 0.0, 0.0]))
    tail = agree = 0.0
    for cfg, tau in ((rest, 5.0), (rest, 2.0), (moving, 5.0)):
        res = loop_numeric_oracle(cfg, tau)
        tail = max(tail, res.tail)
        agree = max(agree, abs(res.value - loop_fixed_tau(cfg, tau)) / abs(loop_fixed_tau(cfg, tau)))
    carrier = clock_frequency_modified(rest)
    kink = max(abs(loop_fourier_oracle(rest, carrier + du) / loop_fourier(rest, carrier + du) - 1)
               for du in (-2.0, -0.4, 0.1, 0.7, 3.0))
    zero = max(abs(loop_fourier(rest, carrier)), abs(loop_fourier_oracle(rest, carrier)))
    passed = tail < 5e-3 and agree < 0.05 and kink < 2e-2 and zero < 1e-12
    return Outcome(passed, f"tail {tail:.1e}, closed-form gap {agree:.1e}, kink {kink:.1e}, zero {zero:.1e}")


# 6 -------------------------------------------------------- mass correction


def criterion_mass_correction() -> Outcome:
    worst = 0.0
    for cfg in (LoopConfig.at_rest(1.0, 0.1), LoopConfig(1.0, 0.5, FourMomentum.on_shell(1.0, [0.2, 0.0, 0.1]))):
        for ratio in np.geomspace(1e-5, 1e-2, 13):
            mc = mass_correction(cfg, ratio * cfg.E0)
            worst = max(worst, abs(mc.quadrature / mc.closed_form - 1))
    return Outcome(worst < 2e-2, f"worst ratio error {worst:.1e} for sigma_E/E0 in [1e-5, 1e-2]")


# 7 -------------------------------------------------------------- detection


def criterion_detection() -> Outcome:
    rng = np.random.default_rng(107)
    exact = sampled = 0.0
    grid = np.arange(-80.0, 120.0, 0.005)
    for _ in range(5):
        s = ArrivalDistribution(rng.uniform(5, 30), rng.uniform(1, 40), "sqm")
        t = ArrivalDistribution(rng.uniform(-5, 5), rng.uniform(1, 40), "tqm_time_part")
        want = s.variance + t.variance
        exact = max(exact, abs(total_arrival(s, t).variance / want - 1))
        sampled = max(sampled, abs(total_arrival(s.sample_on(grid), t).variance / want - 1))
    probe = Gaussian4.diagonal(np.zeros(4), FourMomentum.on_shell(1.0, [0, 0, 1.0]), [0.01] * 4, rep="momentum")
    rows = np.array(slit_sweep(np.geomspace(0.1, 10, 25), probe, 1e3, math.sqrt(2.0), probe_clock_var=4.0))
    tqm_up = bool(np.all(np.diff(rows[:, 2]) > 0))
    sqm_down = bool(np.all(np.diff(rows[:, 1]) < 0))
    passed = exact < 1e-12 and sampled < 1e-3 and tqm_up and sqm_down
    return Outcome(passed, f"exact {exact:.1e}, sampled {sampled:.1e}, "
                           f"TQM spread rising {tqm_up}, SQM clipping falling {sqm_down}")


# 8 ------------------------------------------------------------------ sword


def criterion_sword() -> Outcome:
    free = sword_trace(SwordConfig(B=0.0))
    cfg = free.config
    pk = cfg.packets()
    sqm_ref = sqm_arrival(pk["x"], cfg.L, cfg.p0, m=cfg.fst_mass, relativistic=False, near_field=True).variance
    tqm_ref = sqm_ref + tqm_time_part(pk["t"], cfg.tau_bar, m=cfg.fst_mass).variance
    worst = 0.0
    for trace, ref in ((free.sqm, sqm_ref), (free.tqm, tqm_ref)):
        pop = trace.populated()
        worst = max(worst, float(np.max(np.abs(trace.variance[pop] / ref - 1))))
    bent = sword_trace(SwordConfig(B=0.02))
    pop = bent.sqm.populated() | bent.tqm.populated()
    margin = float(np.min(bent.tqm.variance[pop] - bent.sqm.variance[pop]))
    passed = worst < 1e-2 and pop.sum() > 0 and margin > 0
    return Outcome(passed, f"B=0 variance error {worst:.1e}; B>0 smallest TQM-SQM gap {margin:.2f} "
                           f"over {int(pop.sum())} bins")


# 9 ------------------------------------------------------------------ merit


def criterion_merit() -> Outcome:
    m_value = figure_of_merit(100_000, 1.0).M
    rows = merit_sweep(np.geomspace(1.1, 10.0, 9), trials=10_000, seed=109)
    ratios = [max(n_an, n_mc) / max(1, min(n_an, n_mc)) for _, n_an, n_mc, _ in rows]
    worst = max(ratios)
    bad = [f"{s**2:.2f}" for (s, *_), r in zip(rows, ratios) if r > 2]
    passed = m_value == 5.0 and worst <= 2
    detail = f"M {m_value:g}, worst analytic/MC sample ratio {worst:.2f}"
    if bad:
        detail += f" (exceeds 2 at variance ratios {', '.join(bad)})"
    return Outcome(passed, detail)


CRITERIA = [
    (1, "propagator algebra", criterion_propagators, 10),
    (2, "free-packet concordance", criterion_free_packet, 120),
    (3, "plane-wave exchanged energy", criterion_plane_wave, 5),
    (4, "stick-and-cloud dispersion", criterion_stick_and_cloud, 5),
    (5, "loop finiteness and value", criterion_loop, 600),
    (6, "mass-correction scaling", criterion_mass_correction, 30),
    (7, "detection additivity and slit", criterion_detection, 60),
    (8, "sword trace", criterion_sword, 600),
    (9, "figure of merit", criterion_merit, 120),
]


def evaluate(number: int, title: str, fn, budget: float) -> tuple[bool, str]:
    start = time.perf_counter()
    outcome = fn()
    elapsed = time.perf_counter() - start
    line = _line(number, title, outcome, elapsed, budget)
    return line.startswith("PASS"), line


@pytest.mark.acceptance
@pytest.mark.parametrize("number,title,fn,budget", CRITERIA, ids=[f"criterion_{c[0]}" for c in CRITERIA])
def test_acceptance(number, title, fn, budget, capsys):
    passed, line = evaluate(number, title, fn, budget)
    with capsys.disabled():
        print(f"\n{line}")
    assert passed, line


if __name__ == "__main__":
    for criterion in CRITERIA:
        print(evaluate(*criterion)[1], flush=True)
