from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sphericalize.geometry import (
    INFINITY,
    DimensionError,
    SphericalizationContext,
    arc_length_density,
    d_a,
    dhat_bounds,
    dhat_chain_upper,
    polyline_length_sphericalized,
    unit_ball_volume,
)

coord = st.floats(-50, 50, allow_nan=False)
point2 = st.tuples(coord, coord).map(np.array)
point_or_inf = st.one_of(point2, st.just(INFINITY))


def ctx2(p=2.0):
    return SphericalizationContext(np.zeros(2), p)


def test_d_a_examples():
    c = ctx2()
    assert d_a(c, [0, 0], INFINITY) == 1.0
    assert d_a(c, [1, 0], [3, 0]) == pytest.approx(0.25, abs=1e-15)
    assert d_a(c, [2.5, -1], [2.5, -1]) == 0.0
    assert d_a(c, INFINITY, INFINITY) == 0.0


def test_dhat_bounds_examples():
    c = ctx2()
    assert dhat_bounds(c, [0, 0], INFINITY) == (0.25, 1.0)
    assert dhat_bounds(c, [1, 2], [1, 2]) == (0.0, 0.0)
    lo, hi = dhat_bounds(c, [1, 0], [3, 0])
    assert lo == pytest.approx(0.0625) and hi == pytest.approx(0.25)


def test_chain_upper_examples():
    c = ctx2()
    x, y = np.array([10.0, 0]), np.array([-10.0, 0])
    assert dhat_chain_upper(c, x, y) == d_a(c, x, y)
    assert dhat_chain_upper(c, x, x, [[1, 1]]) == 0.0
    samples = [np.array([t, 0.0]) for t in np.linspace(-10, 10, 41)]
    v = dhat_chain_upper(c, x, y, samples)
    lo, hi = dhat_bounds(c, x, y)
    assert lo <= v <= hi
    # d_a already satisfies the triangle inequality on Euclidean space
    # (triangle plus Ptolemy inequality), so no chain is shorter
    assert v == pytest.approx(hi, rel=1e-14)


def test_arc_length_density_examples():
    c = ctx2()
    assert arc_length_density(c, [0, 0]) == 1.0
    assert arc_length_density(c, [1, 0]) == 0.25
    with pytest.raises(ValueError):
        arc_length_density(c, INFINITY)


@pytest.mark.parametrize("R", [0.5, 3.0, 40.0])
def test_segment_length_matches_antiderivative(R):
    c = ctx2()
    v = np.column_stack([np.linspace(0, R, 40001), np.zeros(40001)])
    assert polyline_length_sphericalized(c, v) == pytest.approx(R / (1 + R), rel=1e-6)


def test_polyline_length_converges_at_second_order():
    c = SphericalizationContext(np.array([0.3, -0.2]), 2.0)
    t = lambda m: np.column_stack([np.linspace(-2, 5, m + 1), np.linspace(1, 3, m + 1)])  # noqa: E731
    exact = polyline_length_sphericalized(c, t(2**16))
    errs = [abs(polyline_length_sphericalized(c, t(m)) - exact) for m in (32, 64, 128)]
    assert 0.2 < errs[1] / errs[0] < 0.3
    assert 0.2 < errs[2] / errs[1] < 0.3


def test_context_validation():
    with pytest.raises(DimensionError):
        SphericalizationContext(np.zeros(1), 2.0)
    with pytest.raises(ValueError):
        SphericalizationContext(np.zeros(2), 0.9)
    with pytest.raises(ValueError):
        SphericalizationContext(INFINITY, 2.0)
    with pytest.raises(DimensionError):
        d_a(ctx2(), [0, 0, 0], [1, 1])


def test_unit_ball_volume():
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)


@given(point_or_inf, point_or_inf)
def test_d_a_symmetric_and_enclosed(x, y):
    c = ctx2()
    d = d_a(c, x, y)
    assert d == pytest.approx(d_a(c, y, x), rel=1e-14, abs=1e-300)
    assert 0.0 <= d <= 1.0 + 1e-15
    lo, hi = dhat_bounds(c, x, y)
    assert lo <= hi


@given(point2)
def test_d_a_identity(x):
    assert d_a(ctx2(), x, x) == 0.0


@given(point_or_inf, point_or_inf, st.lists(point_or_inf, max_size=6), st.lists(point2, max_size=4))
def test_chain_upper_in_bounds_and_monotone(x, y, samples, extra):
    c = ctx2()
    lo, hi = dhat_bounds(c, x, y)
    v = dhat_chain_upper(c, x, y, samples)
    assert v <= hi + 1e-15
    assert dhat_chain_upper(c, x, y, samples + extra) <= v + 1e-15


@given(point2, point2, point2, st.lists(point2, max_size=5))
def test_chain_upper_triangle_inequality(x, y, z, samples):
    c = ctx2()
    pool = samples + [x, y, z]
    dxy = dhat_chain_upper(c, x, y, pool)
    dxz = dhat_chain_upper(c, x, z, pool)
    dzy = dhat_chain_upper(c, z, y, pool)
    assert dxy <= dxz + dzy + 1e-12


@given(point_or_inf, point_or_inf, point_or_inf)
def test_d_a_triangle_inequality(x, y, z):
    c = SphericalizationContext(np.array([1.0, -2.0]), 1.5)
    assert d_a(c, x, y) <= d_a(c, x, z) + d_a(c, z, y) + 1e-12
