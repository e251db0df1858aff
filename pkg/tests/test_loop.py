import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tqmkit.errors import InputError
from tqmkit.gtf import Gaussian4
from tqmkit.loop import (
    LoopConfig,
    clock_frequency_modified,
    finite_part_fourier,
    loop_fixed_tau,
    loop_fourier,
    loop_fourier_oracle,
    loop_numeric_oracle,
    mass_correction,
    omega_curve_rows,
    oracle_product,
    tau_sweep_rows,
)
from tqmkit.propagators import clock_frequency
from tqmkit.units import FourMomentum


M_A, M_B = 1.0, 0.1


@pytest.fixture
def rest():
    return LoopConfig.at_rest(M_A, M_B)


def moving(p3=0.15, mu=M_B):
    return LoopConfig(M_A, mu, FourMomentum.on_shell(M_A, [p3, 0.0, 0.0]))


def test_config_masses(rest):
    assert rest.E0 == pytest.approx(M_A)
    assert rest.M == pytest.approx(M_A + M_B)
    with pytest.raises(InputError):
        LoopConfig.at_rest(1.0, 0.0)


def test_config_rejects_wide_packet():
    p0 = FourMomentum(1.0, 0.0, 0.0, 0.0)
    wide = Gaussian4.diagonal(np.zeros(4), p0, [0.5] * 4, rep="momentum")
    with pytest.raises(InputError):
        LoopConfig(1.0, 0.1, p0, wide)


def test_fixed_tau_magnitude_independent_of_p():
    for cfg in (LoopConfig.at_rest(M_A, M_B), moving(0.3)):
        for tau in (0.5, 3.0, 40.0):
            expect = cfg.m**2 * cfg.mu**2 / (4 * math.pi**2 * cfg.M**2 * tau**2)
            assert abs(loop_fixed_tau(cfg, tau)) == pytest.approx(expect, rel=1e-12)
    off = LoopConfig(M_A, M_B, FourMomentum(1.3, 0.2, -0.1, 0.4))
    assert abs(loop_fixed_tau(off, 2.0)) == pytest.approx(abs(loop_fixed_tau(moving(0.3), 2.0)) *
                                                          (moving(0.3).M / off.M) ** 2, rel=1e-12)


def test_fixed_tau_rejects_zero(rest):
    with pytest.raises(InputError):
        loop_fixed_tau(rest, 0.0)
    with pytest.raises(InputError):
        loop_fixed_tau(rest, np.array([1.0, 0.0]))


def test_tau_squared_envelope(rest):
    taus = np.geomspace(0.01, 1e3, 60)
    scaled = np.abs(loop_fixed_tau(rest, taus)) * taus**2
    assert np.ptp(scaled) / scaled.mean() < 1e-6


def test_small_mu_limit_recovers_a_clock_frequency():
    p0 = FourMomentum.on_shell(M_A, [0.3, 0.0, 0.1])
    phi = Gaussian4.diagonal(np.zeros(4), p0, [0.01] * 4, rep="momentum")
    p = FourMomentum(1.02, 0.3, 0.0, 0.1)
    cfg = LoopConfig(M_A, 1e-9, p, phi)
    assert cfg.M == pytest.approx(cfg.E0, rel=1e-8)
    psq = p.E**2 - p.p3_sq
    # narrow-beam A frequency, energy denominator fixed at E0
    assert clock_frequency_modified(cfg) == pytest.approx(-(psq - M_A**2) / (2 * cfg.E0), abs=1e-8)
    shell = LoopConfig(M_A, 1e-9, p0, phi)
    assert clock_frequency_modified(shell) == pytest.approx(clock_frequency(p0, M_A), abs=1e-8)


def test_oracle_matches_closed_form_at_rest(rest):
    res = loop_numeric_oracle(rest, 5.0 / M_A)
    ref = loop_fixed_tau(rest, 5.0 / M_A)
    assert abs(res.value - ref) / abs(ref) < 1e-6
    assert res.tail < 5e-3
    assert res.doubling_change < 5e-3


def test_oracle_within_validity_window():
    cfg = moving(0.15)
    res = loop_numeric_oracle(cfg, 5.0)
    ref = loop_fixed_tau(cfg, 5.0)
    assert abs(res.value - ref) / abs(ref) < 0.05
    # the residual is the reference-energy prefactor, nothing else
    assert res.value / ref == pytest.approx((cfg.E0 / cfg.m) ** 2, rel=1e-6)


def test_oracle_box_growth_converges(rest):
    res = loop_numeric_oracle(rest, 5.0, box_factors=(8.0, 12.0, 16.0, 24.0, 32.0, 48.0))
    errs = np.abs(np.array(res.sweep) - res.value)
    assert np.all(np.diff(errs) < 0)
    assert np.all(np.isfinite(res.sweep))
    assert max(abs(v) for v in res.sweep) < 1.05 * abs(res.value)


def test_oracle_tensor_product_equals_4d_grid():
    cfg = LoopConfig(M_A, 0.3, FourMomentum(1.05, 0.2, -0.1, 0.05))
    tau, box, n = 2.0, 0.4, 41
    k = np.linspace(-8 * box, 8 * box, n)
    dk = k[1] - k[0]
    grid = np.stack(np.meshgrid(k, k, k, k, indexing="ij"), axis=-1)
    metric = np.array([1.0, -1.0, -1.0, -1.0])
    p = cfg.p.as_array()
    ka = p - grid
    sq_a = (ka**2) @ metric
    sq_b = (grid**2) @ metric
    integrand = np.exp(1j * tau * ((sq_a - cfg.m**2) / (2 * cfg.E0) + (sq_b - cfg.mu**2) / (2 * cfg.mu))
                       - 0.5 * np.sum(grid**2, axis=-1) / box**2)
    w = np.full(n, dk)
    w[[0, -1]] *= 0.5
    weights = np.einsum("i,j,k,l->ijkl", w, w, w, w)
    brute = np.sum(weights * integrand) / (2 * math.pi) ** 4
    assert oracle_product(cfg, tau, box, n) == pytest.approx(brute, rel=1e-10)


def test_oracle_independent_of_packet_width():
    p0 = FourMomentum(1.0, 0.0, 0.0, 0.0)
    vals = []
    for sigma in (0.01, 0.04):
        phi = Gaussian4.diagonal(np.zeros(4), p0, [sigma] * 4, rep="momentum")
        cfg = LoopConfig(M_A, M_B, p0, phi)
        res = loop_numeric_oracle(cfg, 5.0)
        amp = phi.amplitude(p0.as_array())
        assert res.packet_weighted == pytest.approx(res.value * amp, rel=1e-12)
        vals.append(res.value)
    assert vals[0] == pytest.approx(vals[1], rel=1e-9)


def test_oracle_rejects_bad_inputs(rest):
    with pytest.raises(InputError):
        loop_numeric_oracle(rest, -1.0)
    with pytest.raises(InputError):
        loop_numeric_oracle(rest, 1.0, box_factors=(3.0, 6.0, 12.0))


def test_fourier_zero_and_slope(rest):
    w = clock_frequency_modified(rest)
    assert loop_fourier(rest, w) == 0
    slope = rest.m**2 * rest.mu**2 / (4 * math.pi**2 * rest.M**2) * math.sqrt(math.pi / 2)
    du = np.array([-3.0, -0.5, 0.25, 2.0])
    assert np.allclose(loop_fourier(rest, w + du), 1j * slope * np.abs(du), rtol=1e-13, atol=0)


@pytest.mark.parametrize("du", [-2.0, -0.4, 0.1, 0.7, 3.0])
def test_fourier_oracle_reproduces_kink(rest, du):
    omega = clock_frequency_modified(rest) + du
    num = loop_fourier_oracle(rest, omega)
    ref = loop_fourier(rest, omega)
    assert abs(num - ref) / abs(ref) < 2e-2


def test_fourier_oracle_zero_at_carrier(rest):
    num = loop_fourier_oracle(rest, clock_frequency_modified(rest))
    assert abs(num) < 1e-12


def test_finite_part_of_inverse_square():
    # FP int e^{iu t} / t^2 dt = -pi |u|
    for u in (-1.5, 0.3, 2.0):
        val = finite_part_fourier(lambda t: 1.0 / t**2, u, (0.02, 0.01, 0.005))
        assert val == pytest.approx(-math.sqrt(math.pi / 2) * abs(u), rel=1e-6)


def test_mass_correction_closed_form(rest):
    mc = mass_correction(rest, 0.01)
    assert mc.closed_form == pytest.approx(0.01**2 / (4 * rest.M))
    with pytest.raises(InputError):
        mass_correction(rest, 0.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-5, 1e-2))
def test_mass_correction_quadrature_tracks_closed_form(ratio):
    cfg = moving(0.2)
    mc = mass_correction(cfg, ratio * cfg.E0)
    assert mc.quadrature / mc.closed_form == pytest.approx(1.0, abs=2e-2)


def test_mass_correction_converges_and_scales(rest):
    ratios = [abs(mass_correction(rest, s).quadrature / mass_correction(rest, s).closed_form - 1)
              for s in (0.1, 0.03, 0.01, 0.003)]
    assert np.all(np.diff(ratios) < 0)
    assert mass_correction(rest, 0.02).closed_form / mass_correction(rest, 0.01).closed_form == pytest.approx(4.0)
    assert mass_correction(rest, 1e-8).quadrature < 1e-16


def test_mass_correction_rejects_cloud_through_zero(rest):
    with pytest.raises(InputError):
        mass_correction(rest, 0.5)


def test_export_rows(rest):
    rows = tau_sweep_rows(rest, [1.0, 2.0])
    assert len(rows) == 2 and rows[0][0] == 1.0
    assert complex(rows[1][1], rows[1][2]) == loop_fixed_tau(rest, 2.0)
    curve = omega_curve_rows(rest, [0.0, 1.0])
    assert curve[1][1] == pytest.approx(abs(loop_fourier(rest, 1.0)))
