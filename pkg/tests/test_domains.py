from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sphericalize.domains import (
    Ball,
    DomainParseError,
    DomainSpec,
    HalfSpace,
    Minus,
    Ray,
    ResolutionError,
    Segment,
    Union,
    Whole,
    box,
    components_outside_ball,
    connectivity_at_infinity,
    connectivity_at_point,
    directions_at_infinity,
    mazurkiewicz_distance,
    parse_domain,
    porosity_at_infinity,
    regularity_at_infinity_verdict,
)
from sphericalize.domains.analysis import slit_mazurkiewicz_oracle
from sphericalize.domains.csg import INSIDE, MIXED, OUTSIDE
from sphericalize.domains.examples import (
    annulus,
    exterior_ball,
    fingers,
    fingers_component_count,
    half_plane,
    punctured_space,
    slit_plane,
    staircase,
    uncountable_rays,
)
from sphericalize.solver import GateError

TEXT = """# quadrant minus a disc and a ray
minus
  intersect
    halfspace 1 0 0
    halfspace 0 1 0
  end
  ball 3 3 1
  ray 0 5 1 0 2
end
"""


def test_parse_and_round_trip():
    dom = parse_domain(TEXT)
    assert dom.n == 2 and not dom.bounded
    again = parse_domain(dom.to_text())
    pts = np.random.default_rng(0).uniform(-1, 8, (2000, 2))
    assert np.array_equal(dom.membership(pts), again.membership(pts))
    assert dom.membership(np.array([[1.0, 1.0], [3.0, 3.0], [-1.0, 1.0]])).tolist() == [True, False, False]


@pytest.mark.parametrize("bad", ["ball 0 0", "minus\nball 0 0 1\n", "end", "frobnicate 1", "ball 0 0 x"])
def test_parse_errors(bad):
    with pytest.raises(DomainParseError):
        parse_domain(bad)


def test_exact_decimals():
    dom = parse_domain("ball 0.1 0.2 0.3")
    assert dom.region.center_exact[0] == Fraction(1, 10)
    assert dom.region.radius_exact == Fraction(3, 10)


def test_thin_sets_excluded_and_thickened():
    dom = slit_plane()
    on = np.array([[0.0, 0.5], [0.0, 1.0], [0.0, 1.001]])
    assert dom.membership(on).tolist() == [False, False, True]
    assert dom.grid_membership(on, 0.01).tolist() == [False, False, False]


def test_classify_ball_exact():
    r = Minus(Whole(2), Ray([0, 0], [1, 0], 1))
    assert r.classify_ball((Fraction(3), Fraction(1, 2)), Fraction(3, 4)) == MIXED
    # tangent open ball misses the ray
    assert r.classify_ball((Fraction(3), Fraction(1, 2)), Fraction(1, 2)) == INSIDE
    assert r.classify_ball((Fraction(3), Fraction(1)), Fraction(1, 2)) == INSIDE
    assert Ball([0, 0], 1).classify_ball((Fraction(3), Fraction(0)), Fraction(1)) == OUTSIDE


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.01, 3))
def test_classify_ball_consistent_with_membership(cx, cy, r):
    reg = Minus(box([-1, -1], [2, 1]), Segment([0, 0], [0, 1], -0.5, 0.5))
    verdict = reg.classify_ball((Fraction(cx), Fraction(cy)), Fraction(r))
    th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    pts = np.column_stack([cx + 0.999 * r * np.cos(th), cy + 0.999 * r * np.sin(th)])
    pts = np.vstack([pts, [[cx, cy]]])
    inside = reg.contains(pts)
    if verdict == INSIDE:
        assert inside.all()
    elif verdict == OUTSIDE:
        assert not inside.any()


def test_components_examples():
    comps = components_outside_ball(half_plane(), [0, 0], 1, r_max=64)
    assert sum(not c.bounded for c in comps) == 1
    comps = components_outside_ball(exterior_ball(2), [0, 0], 2, r_max=64)
    assert len(comps) == 1 and not comps[0].bounded


@pytest.mark.parametrize("k", [5.0, 20.0])
def test_fingers_count(k):
    comps = components_outside_ball(fingers(r_max=256), [0, 0], k, h=0.25, r_max=256)
    assert sum(not c.bounded for c in comps) == fingers_component_count(k)


def test_fingers_count_formula():
    assert fingers_component_count(2.0) == 2
    assert fingers_component_count(5.0) == 4
    with pytest.raises(ValueError):
        fingers_component_count(1.0)


def test_staircase_components_bounded():
    comps = components_outside_ball(staircase(4), [0, 0], 2, h=1 / 64, r_max=64)
    assert comps and all(c.bounded for c in comps)


def test_resolution_error():
    with pytest.raises(ResolutionError):
        components_outside_ball(staircase(5), [0, 0], 2, h=0.25)


def test_directions_nest():
    dirs = directions_at_infinity(fingers(r_max=128), [0, 0], [5.0, 10.0], h=0.25, r_max=128)
    assert len(dirs) == fingers_component_count(10.0)
    assert all(d.depth == 2 for d in dirs)


def test_connectivity_examples():
    rep = connectivity_at_point(half_plane(), [0.3, 0.0], 0.5, h=1 / 64)
    assert rep.N == 1 and rep.H == [] and rep.ok
    assert connectivity_at_point(slit_plane(), [0.0, 0.0], 0.5, h=1 / 64).N == 2
    assert connectivity_at_point(slit_plane(), [0.0, 1.0], 0.5, h=1 / 64).N == 1
    rep = connectivity_at_infinity(exterior_ball(2), 2.0, h=0.5, r_max=64)
    assert rep.N == 1 and rep.H_bounded


def test_porosity_examples():
    rep = porosity_at_infinity(half_plane())
    assert rep.is_porous and rep.theta == 0.5
    # every witness re-checks with exact arithmetic
    for x, th in rep.witnesses:
        xe = tuple(Fraction(v) for v in x)
        rad = Fraction(th) * Fraction(math.hypot(*x))
        assert half_plane().ball_disjoint(xe, rad * Fraction(999, 1000), exact=True)
    assert porosity_at_infinity(uncountable_rays(4)).is_porous
    assert not porosity_at_infinity(punctured_space()).is_porous


def test_regularity_examples():
    assert regularity_at_infinity_verdict(annulus(2), 1.5).verdict == "regular (p<Q)"
    v = regularity_at_infinity_verdict(staircase(3), 2.0, h=1 / 32, r_max=32)
    assert v.verdict == "regular (no unbounded components)"
    assert regularity_at_infinity_verdict(half_plane(), 2.0, r_max=32).verdict == "regular (porosity)"
    assert regularity_at_infinity_verdict(exterior_ball(2), 2.0, r_max=32).verdict == "inconclusive"
    with pytest.raises(GateError):
        regularity_at_infinity_verdict(punctured_space(), 2.0)


def test_mazurkiewicz_convex_and_trivial():
    dom = DomainSpec(Ball([0, 0], 2))
    x, y = np.array([-1.0, 0.3]), np.array([1.2, -0.5])
    h = 1 / 16
    est = mazurkiewicz_distance(dom, x, y, h=h)
    assert np.linalg.norm(x - y) <= est + 1e-12 <= np.linalg.norm(x - y) + h * math.sqrt(2) + 1e-12
    assert mazurkiewicz_distance(dom, x, x, h=h) == 0.0


def test_mazurkiewicz_slit():
    x, y = np.array([-0.05, 0.0]), np.array([0.05, 0.0])
    est = mazurkiewicz_distance(slit_plane(), x, y, h=1 / 32)
    exact = slit_mazurkiewicz_oracle(x, y, 1.0)
    assert exact > 10 * np.linalg.norm(x - y)
    assert exact - 1e-9 <= est <= exact + 4 / 32


def test_mazurkiewicz_dhat_frame_upper_bounds_metric():
    from sphericalize.geometry import SphericalizationContext, d_a

    ctx = SphericalizationContext(np.zeros(2), 2.0)
    x, y = np.array([-0.3, 0.5]), np.array([0.4, 0.2])
    est = mazurkiewicz_distance(half_plane(), x + [0, 0.2], y + [0, 0.2], frame="dhat", h=1 / 32, ctx=ctx)
    assert est >= d_a(ctx, x + [0, 0.2], y + [0, 0.2]) - 1e-12


def test_parabolicity_energies_nonincreasing_and_trend():
    from sphericalize.domains import p_parabolicity_estimate

    rep = p_parabolicity_estimate(exterior_ball(2), None, 2.0, J=4, h=1 / 8, symmetry_axes=(0, 1))
    assert rep.nonincreasing
    exact = [2 * math.pi / math.log(R / 2) for R in rep.radii]
    assert np.allclose(rep.energies, exact, rtol=0.03)


def test_parabolicity_disconnected_direction_has_zero_energy():
    from sphericalize.domains import Union, p_parabolicity_estimate

    dom = DomainSpec(Union(Ball([0, 0], 3), HalfSpace([1, 0], 10)))
    dirs = directions_at_infinity(dom, [0, 0], [4.0], h=0.5, r_max=64)
    assert len(dirs) == 1
    rep = p_parabolicity_estimate(dom, dirs[0], 2.0, J=3, h=1 / 4)
    assert np.allclose(rep.energies, 0.0, rtol=0, atol=1e-20)
