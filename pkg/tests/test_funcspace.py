import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from impiss.funcspace import (DivergenceUnverified, InvalidFunction, MonotonePW, NotInvertible, PosDefFn, SontagKL,
                              adaptive_simpson, check_divergence, f_transform, kl_time_shift,
                              monotone_inverse, window_integral_bounds)
from impiss.timing import generate, uib_majorant, uib_profile


def test_adaptive_simpson_polynomial_and_singular_endpoint():
    assert adaptive_simpson(lambda s: s ** 3, 0.0, 2.0) == pytest.approx(4.0, abs=1e-12)
    assert adaptive_simpson(lambda s: 1.0 / (s * s), 0.25, 1.0) == pytest.approx(3.0, rel=1e-10)


def test_monotone_pw_rejects_decreasing_values():
    with pytest.raises(InvalidFunction):
        MonotonePW.from_points([0, 1, 2], [0, 2, 1])


def test_inverse_needs_strictness():
    flat = MonotonePW.from_points([0, 1, 2], [0, 1, 1], tail_slope=1.0)
    with pytest.raises(NotInvertible):
        monotone_inverse(flat)


@given(st.lists(st.floats(0.01, 10), min_size=2, max_size=8),
       st.lists(st.floats(0.01, 10), min_size=2, max_size=8), st.floats(0, 100))
def test_inverse_round_trip(dx, dy, x):
    n = min(len(dx), len(dy))
    xs = np.concatenate([[0.0], np.cumsum(dx[:n])])
    ys = np.concatenate([[0.0], np.cumsum(dy[:n])])
    f = MonotonePW.from_points(xs, ys, tail_slope=1.0)
    assert f.is_kinf
    g = monotone_inverse(f)
    assert g(f(x)) == pytest.approx(x, rel=1e-9, abs=1e-9)


def test_vectorized_evaluation_matches_scalar():
    f = MonotonePW.from_points([0, 1, 3], [0, 2, 3], tail_slope=0.5)
    grid = np.linspace(-1, 6, 57)
    assert np.allclose(f(grid), [f(float(v)) for v in grid])


def test_sontag_kl_decreases_in_time():
    beta = SontagKL(MonotonePW.identity(), PosDefFn.from_text("r^2"), rate=1.0, scale=2.0)
    assert beta(3.0, 0.0) == pytest.approx(18.0)
    assert beta(3.0, 1.0) == pytest.approx(18.0 / math.e)


@pytest.mark.parametrize("period", [0.5, 1.0, 2.0])
def test_time_shift_dominates_on_periodic_profiles(period):
    beta = SontagKL(MonotonePW.identity(), MonotonePW.identity(), 1.0)
    deltas = np.linspace(0.0, 60.0, 121)
    counts = uib_profile([generate("periodic", 60.0, period=period)], deltas)
    phi = uib_majorant(deltas, counts)
    hat, trace = kl_time_shift(beta, phi)
    r = np.logspace(-3, 3, 25)[:, None]
    s = np.linspace(0.0, 50.0, 200)[None, :]
    assert np.all(beta(r, s) <= hat(r, s + phi(s)) * (1 + 1e-12))
    assert trace.n0 >= 0


def test_window_integral_bounds_constant_rate():
    lo, hi = window_integral_bounds(2.0, 0.5)
    assert lo == hi == 1.0


def test_divergence_check_separates_linear_from_quadratic_decay():
    # F(r) = ln r for a linear rate, F(r) = 1 - 1/r for a quadratic one
    assert check_divergence(f_transform(lambda r: r)) == pytest.approx(100 * math.log(10), rel=1e-6)
    with pytest.raises(DivergenceUnverified):
        check_divergence(f_transform(lambda r: r * r))
