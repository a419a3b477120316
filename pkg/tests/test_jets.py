import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ttpinn.jets import Jet2, jet_add, jet_const, jet_mul, jet_scale, jet_sin, jet_x, jet_y

finite = st.floats(-3, 3, allow_nan=False)
jet_values = st.tuples(finite, finite, finite, finite, finite)


def test_seed_jets():
    assert jet_x(3.0).as_tuple() == (3.0, 1.0, 0.0, 0.0, 0.0)
    assert jet_y(2.0).as_tuple() == (2.0, 0.0, 1.0, 0.0, 0.0)
    assert jet_const(5.0).as_tuple() == (5.0, 0.0, 0.0, 0.0, 0.0)


def test_x_squared():
    j = jet_mul(jet_x(3.0), jet_x(3.0))
    assert j.as_tuple() == (9.0, 6.0, 0.0, 2.0, 0.0)


def test_mul_by_one_is_identity():
    a = Jet2(1.5, -0.2, 0.3, 0.7, -1.1)
    got = jet_mul(a, jet_const(1.0))
    assert got.as_tuple() == a.as_tuple()


def test_bilinear_xy():
    j = jet_mul(jet_x(0.3), jet_y(0.7))
    assert j.v == pytest.approx(0.21)
    assert j.dx == pytest.approx(0.7)
    assert j.dy == pytest.approx(0.3)
    assert j.dxx == 0.0 and j.dyy == 0.0


def test_sin_at_zero():
    j = jet_sin(jet_x(0.0))
    assert j.as_tuple() == (0.0, 1.0, 0.0, 0.0, 0.0)


def test_sin_at_half_pi():
    j = jet_sin(jet_x(math.pi / 2))
    assert j.v == pytest.approx(1.0)
    assert j.dx == pytest.approx(0.0, abs=1e-15)
    assert j.dxx == pytest.approx(-1.0)
    assert j.dy == 0.0 and j.dyy == 0.0


def test_laplacian_eigenfunction_identity():
    # u = sin(kx) sin(ky): u_xx == -k^2 u and u_yy == -k^2 u
    k = 4.0 * math.pi
    x, y = 0.13, 0.42
    u = jet_mul(jet_sin(jet_scale(jet_x(x), k)), jet_sin(jet_scale(jet_y(y), k)))
    assert abs(u.dxx + k * k * u.v) <= 1e-10 * max(1.0, abs(u.dxx))
    assert abs(u.dyy + k * k * u.v) <= 1e-10 * max(1.0, abs(u.dyy))


def _random_expression(rng, depth=0):
    """Random closure point -> Jet2 built from the jet algebra."""
    roll = rng.uniform()
    if depth >= 4 or roll < 0.25:
        which = rng.integers(0, 3)
        c = float(rng.uniform(-2, 2))
        if which == 0:
            return lambda xj, yj: xj
        if which == 1:
            return lambda xj, yj: yj
        return lambda xj, yj: jet_const(c)
    if roll < 0.45:
        f = _random_expression(rng, depth + 1)
        g = _random_expression(rng, depth + 1)
        return lambda xj, yj: jet_add(f(xj, yj), g(xj, yj))
    if roll < 0.65:
        f = _random_expression(rng, depth + 1)
        g = _random_expression(rng, depth + 1)
        return lambda xj, yj: jet_mul(f(xj, yj), g(xj, yj))
    if roll < 0.8:
        f = _random_expression(rng, depth + 1)
        c = float(rng.uniform(-2, 2))
        return lambda xj, yj: jet_scale(f(xj, yj), c)
    f = _random_expression(rng, depth + 1)
    return lambda xj, yj: jet_sin(f(xj, yj))


def test_derivatives_match_finite_differences(rng):
    h = 1e-4
    checked = 0
    for _ in range(1000):
        expr = _random_expression(rng)
        x0 = float(rng.uniform(-1.5, 1.5))
        y0 = float(rng.uniform(-1.5, 1.5))

        def val(x, y):
            return expr(jet_x(x), jet_y(y)).v

        j = expr(jet_x(x0), jet_y(y0))
        fd_x = (val(x0 + h, y0) - val(x0 - h, y0)) / (2 * h)
        fd_y = (val(x0, y0 + h) - val(x0, y0 - h)) / (2 * h)
        fd_xx = (val(x0 + h, y0) - 2 * val(x0, y0) + val(x0 - h, y0)) / (h * h)
        fd_yy = (val(x0, y0 + h) - 2 * val(x0, y0) + val(x0, y0 - h)) / (h * h)
        assert abs(j.dx - fd_x) <= 1e-6 * (1 + abs(j.dx))
        assert abs(j.dy - fd_y) <= 1e-6 * (1 + abs(j.dy))
        assert abs(j.dxx - fd_xx) <= 1e-4 * (1 + abs(j.dxx))
        assert abs(j.dyy - fd_yy) <= 1e-4 * (1 + abs(j.dyy))
        checked += 1
    assert checked == 1000


def test_linear_map_commutes_with_channels(rng):
    # applying a linear map to a vector of jets == mapping each channel
    w = rng.standard_normal((3, 4))
    jets = [Jet2(*rng.standard_normal(5)) for _ in range(4)]
    mapped = []
    for row in w:
        acc = jet_const(0.0)
        for c, j in zip(row, jets):
            acc = jet_add(acc, jet_scale(j, c))
        mapped.append(acc)
    for ch in range(5):
        channel_vec = np.array([j.as_tuple()[ch] for j in jets])
        want = w @ channel_vec
        got = np.array([m.as_tuple()[ch] for m in mapped])
        np.testing.assert_allclose(got, want, atol=1e-12)


@given(a=jet_values, b=jet_values)
def test_mul_commutes(a, b):
    ja, jb = Jet2(*a), Jet2(*b)
    assert jet_mul(ja, jb).as_tuple() == pytest.approx(jet_mul(jb, ja).as_tuple())


@given(a=jet_values, b=jet_values, c=finite)
def test_mul_distributes_over_scaled_add(a, b, c):
    ja, jb = Jet2(*a), Jet2(*b)
    lhs = jet_mul(ja, jet_add(jb, jet_scale(jb, c)))
    rhs = jet_add(jet_mul(ja, jb), jet_scale(jet_mul(ja, jb), c))
    assert lhs.as_tuple() == pytest.approx(rhs.as_tuple(), abs=1e-9)


def test_jets_accept_arrays():
    x = np.array([0.1, 0.2, 0.3])
    j = jet_sin(jet_x(x))
    np.testing.assert_allclose(j.v, np.sin(x))
    np.testing.assert_allclose(j.dx, np.cos(x))
    np.testing.assert_allclose(j.dxx, -np.sin(x))
    np.testing.assert_array_equal(j.dy, np.zeros(3))
