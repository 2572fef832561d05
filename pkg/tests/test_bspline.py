import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.interpolate import CubicSpline

from swimopt import bspline as B

FIG_KNOTS = [0, 0, 0, 0, 1, 2, 5, 5, 5, 5]


def random_curve(rng, degree=None):
    d = int(rng.integers(0, 4)) if degree is None else degree
    n = int(rng.integers(d + 1, d + 12))
    t0 = rng.uniform(-2, 2)
    tn = t0 + rng.uniform(0.1, 5)
    interior = np.sort(rng.uniform(t0, tn, n - d - 1))
    knots = B.clamped_knots(t0, tn, d, interior)
    return B.BSplineCurve(d, knots, rng.normal(size=n))


def test_knot_vectors():
    assert B.clamped_knots(0, 5, 3, [1, 2]).tolist() == FIG_KNOTS
    assert B.clamped_uniform_knots(0, 1, 1, 0).tolist() == [0.0, 1.0]
    assert B.clamped_uniform_knots(0, 4, 4, 2).tolist() == [0, 0, 0, 1, 2, 3, 4, 4, 4]
    k = B.knots_for(40, 3, 0.0, 3.0)
    assert k.size == 40 + 3 + 1


def test_knot_errors():
    with pytest.raises(ValueError):
        B.clamped_knots(1, 1, 2)
    with pytest.raises(ValueError):
        B.clamped_knots(0, 1, 2, [0.5, 0.2])
    with pytest.raises(ValueError):
        B.knots_for(2, 3, 0, 1)
    with pytest.raises(ValueError):
        B.BSplineCurve(2, [0, 0, 0, 1, 1, 1], [1, 2])


def test_degree_zero_indicator():
    knots = [0.0, 1.0, 2.0, 3.0]
    assert B.basis(1, 0, 1.0, knots) == 1.0
    assert B.basis(1, 0, 1.999, knots) == 1.0
    assert B.basis(1, 0, 2.0, knots) == 0.0
    # closed at the final knot
    assert B.basis(2, 0, 3.0, knots) == 1.0


def test_quadratic_uniform_midpoint():
    # hand expansion on a unit cell: (1-u)^2/2, (1 + 2u - 2u^2)/2, u^2/2 at u = 1/2
    knots = np.arange(8.0)
    vals = [B.basis(i, 2, 3.5, knots) for i in range(1, 4)]
    assert vals == pytest.approx([0.125, 0.75, 0.125], abs=1e-15)
    assert B.basis(0, 2, 3.5, knots) == 0.0


def test_fast_basis_matches_recursion():
    rng = np.random.default_rng(0)
    for _ in range(50):
        c = random_curve(rng)
        for t in rng.uniform(c.t0, c.tn, 10).tolist() + [c.t0, c.tn]:
            direct = [B.basis(i, c.degree, t, c.knots) for i in range(c.control_points.size)]
            assert B.basis_matrix([t], c.degree, c.knots)[0] == pytest.approx(direct, abs=1e-13)


def test_partition_local_support_bounds_endpoints():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        c = random_curve(rng)
        ts = np.concatenate([rng.uniform(c.t0, c.tn, 20), [c.t0, c.tn]])
        M = B.basis_matrix(ts, c.degree, c.knots)
        assert np.abs(M.sum(1) - 1).max() <= 1e-12
        k = c.knots
        for i in range(M.shape[1]):
            outside = (ts < k[i]) | (ts >= k[i + c.degree + 1])
            outside &= ~((ts == c.tn) & (i == M.shape[1] - 1))
            assert np.all(M[outside, i] == 0.0)
        vals = c(ts)
        P = c.control_points
        assert vals.max() <= P.max() + 1e-12 and vals.min() >= P.min() - 1e-12
        assert abs(c(c.t0) - P[0]) <= 1e-12 and abs(c(c.tn) - P[-1]) <= 1e-12


def test_constant_control_points():
    c = B.BSplineCurve.uniform(np.full(7, 2.5), 3, 0, 1)
    assert np.allclose(c(np.linspace(0, 1, 50)), 2.5, atol=1e-14)
    d = c.derivative()
    assert np.allclose(d.control_points, 0.0)


def test_figure_configuration_boundedness():
    P = np.array([0.0, 0.0, 1.0, 1.0, 0.0, 0.0])
    curve = B.BSplineCurve(3, FIG_KNOTS, P)
    ts = np.linspace(0, 5, 2001)
    vals = curve(ts)
    assert vals.min() >= -1e-12 and vals.max() <= 1 + 1e-12
    # a natural cubic interpolant through the same points at their abscissae overshoots
    g = B.greville(FIG_KNOTS, 3)
    cs = CubicSpline(g, P, bc_type="natural")(ts)
    assert cs.max() > 1.0 or cs.min() < 0.0


def test_linear_ramp_derivative():
    knots = B.knots_for(6, 1, 0.0, 5.0)
    c = B.BSplineCurve(1, knots, np.arange(6.0))
    assert np.allclose(c.derivative().control_points, 1.0)
    c3 = B.BSplineCurve(3, B.knots_for(8, 3, 0.0, 1.0), B.greville(B.knots_for(8, 3, 0.0, 1.0), 3))
    assert np.allclose(c3.derivative()(np.linspace(0, 1, 33)), 1.0, atol=1e-12)


def test_derivative_against_finite_differences():
    rng = np.random.default_rng(2)
    h = 1e-6
    for _ in range(20):
        c = random_curve(rng, degree=int(rng.integers(2, 4)))
        d = c.derivative()
        ts = rng.uniform(c.t0 + 2 * h, c.tn - 2 * h, 50)
        fd = (c(ts + h) - c(ts - h)) / (2 * h)
        # central differences straddling a knot see the one-sided slopes
        ok = np.all(np.abs(ts[:, None] - c.knots[None, :]) > 2 * h, axis=1)
        assert np.abs(d(ts) - fd)[ok].max(initial=0.0) < 1e-6


def test_eval_outside_span_raises():
    c = B.BSplineCurve.uniform([0, 1, 2], 2, 0, 1)
    with pytest.raises(ValueError):
        c(1.5)


def test_dict_round_trip():
    c = B.BSplineCurve.uniform([0.3, -1, 2, 4], 2, 0, 3)
    c2 = B.BSplineCurve.from_dict(c.to_dict())
    assert np.array_equal(c2.knots, c.knots) and np.array_equal(c2.control_points, c.control_points)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=12), st.floats(0, 1))
def test_boundedness_property(points, frac):
    c = B.BSplineCurve.uniform(points, 3, 0.0, 2.0)
    v = c(2.0 * frac)
    assert min(points) - 1e-9 <= v <= max(points) + 1e-9
