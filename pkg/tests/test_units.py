import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tqmkit.errors import InputError
from tqmkit.units import (
    FourMomentum,
    Tolerances,
    bohr_crossing_time_as,
    minkowski_dot,
    on_shell_energy,
    time_energy_convert,
)

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)
vec = st.tuples(finite, finite, finite, finite)


def test_minkowski_examples():
    assert minkowski_dot(FourMomentum(1, 0, 0, 0), FourMomentum(1, 0, 0, 0)) == 1
    assert minkowski_dot(FourMomentum(0, 1, 0, 0), FourMomentum(0, 1, 0, 0)) == -1
    p = FourMomentum(3, 1, 2, 2)
    assert minkowski_dot(p, p) == 0


@given(vec, vec, vec, finite)
def test_minkowski_bilinear_symmetric(a, b, c, k):
    a, b, c = map(np.array, (a, b, c))
    assert minkowski_dot(a, b) == minkowski_dot(b, a)
    lhs = minkowski_dot(k * a + b, c)
    rhs = k * minkowski_dot(a, c) + minkowski_dot(b, c)
    scale = 1 + abs(k) * np.abs(a).max() * np.abs(c).max() + np.abs(b).max() * np.abs(c).max()
    assert abs(lhs - rhs) <= 1e-12 * scale


@given(finite, finite, finite, finite)
def test_mass_sq_matches_components(E, x, y, z):
    p = FourMomentum(E, x, y, z)
    expect = E * E - (x * x + y * y + z * z)
    assert p.mass_sq() == pytest.approx(expect, rel=1e-12, abs=1e-9)


def test_on_shell_energy_examples():
    assert on_shell_energy(1, [0, 0, 0]) == 1
    assert on_shell_energy(0, [3, 4, 0]) == 5
    assert on_shell_energy(0.511e6, [0.511e6, 0, 0]) == pytest.approx(0.511e6 * math.sqrt(2), rel=1e-15)
    with pytest.raises(InputError):
        on_shell_energy(-1, [0, 0, 0])


@given(st.floats(0, 1e6), st.tuples(finite, finite, finite))
def test_on_shell_energy_at_least_mass(m, p):
    assert on_shell_energy(m, p) >= m


def test_time_conversion():
    assert time_energy_convert(1.0, "eV^-1") == pytest.approx(658.2119569, rel=1e-10)
    with pytest.raises(InputError):
        time_energy_convert(1.0, "fortnights")


@given(st.floats(min_value=1e-6, max_value=1e9))
def test_time_conversion_round_trip(x):
    assert time_energy_convert(time_energy_convert(x, "attoseconds"), "eV^-1") == pytest.approx(x, rel=1e-12)
    assert time_energy_convert(time_energy_convert(x, "eV^-1"), "attoseconds") == pytest.approx(x, rel=1e-12)


def test_bohr_radius_crossing_is_attoseconds():
    assert bohr_crossing_time_as() == pytest.approx(0.177, abs=5e-4)


def test_tolerances_positive():
    t = Tolerances()
    assert t.rel_tol == 1e-9 and t.quad_tol == 1e-3 and t.quad_points == 64
    for bad in ({"rel_tol": 0}, {"quad_points": -1}, {"mc_samples": 0}, {"abs_tol": -1e-3}):
        with pytest.raises(InputError):
            Tolerances(**bad)
