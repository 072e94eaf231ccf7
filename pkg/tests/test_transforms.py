from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from sphericalize.domains import DomainSpec, HalfSpace
from sphericalize.geometry import SphericalizationContext
from sphericalize.measures import InversionDensity
from sphericalize.transforms import (
    AnnulusRadialFamily,
    FrameError,
    GradientField,
    InversionMap,
    admissibility_check,
    energy,
    energy_equality_check,
    invert_domain,
    invert_gradient_and_energy,
    modulus_invariance_check,
    pointwise_energy_gap,
    sphericalize_gradient,
    unsphericalize_gradient,
)


def ctx(p=2.0, a=(0.0, 0.0)):
    return SphericalizationContext(np.array(a), p)


def test_sphericalize_gradient_examples():
    nodes = np.array([[1.0, 0.0], [0.0, -1.0], [3.0, 4.0]])
    g = GradientField(nodes, np.zeros(3), np.ones(3))
    assert np.all(sphericalize_gradient(ctx(), g).values == 0)
    g1 = GradientField(nodes, np.ones(3), np.ones(3))
    gh = sphericalize_gradient(ctx(), g1)
    assert gh.frame == "sphericalized"
    assert gh.values[:2] == pytest.approx([4.0, 4.0])
    back = unsphericalize_gradient(ctx(), gh)
    assert np.allclose(back.values, 1.0, rtol=1e-15, atol=0)
    with pytest.raises(FrameError):
        sphericalize_gradient(ctx(), gh)


def test_energy_examples():
    g = GradientField.on_grid(lambda x: np.ones(len(x)), [0, 0], [1, 1], 1 / 16)
    for p in (1.5, 2.0, 3.0):
        assert energy(g, None, p) == pytest.approx(1.0)
    # |grad x1| = 1
    g = GradientField.on_grid(lambda x: np.abs(np.ones_like(x[:, 0])), [0, 0], [1, 1], 1 / 8)
    assert energy(g, None, 2.0) == pytest.approx(1.0)
    # g = |x|^(-1/2) on 1<|x|<2, p = 3
    g = GradientField.radial(lambda x: np.linalg.norm(x, axis=1) ** -0.5, 1, 2, 1 / 64)
    exact = 2 * math.pi * integrate.quad(lambda t: t**-1.5 * t, 1, 2)[0]
    assert energy(g, None, 3.0) == pytest.approx(exact, rel=1e-4)


def test_energy_equality_zero_field():
    g = GradientField(np.array([[1.0, 1.0]]), [0.0], [1.0])
    assert energy_equality_check(ctx(), g) == (0.0, 0.0, 0.0)


@given(st.integers(0, 2**31 - 1), st.sampled_from([1.5, 2.0, 3.0]))
def test_pointwise_identity(seed, p):
    rng = np.random.default_rng(seed)
    nodes = rng.normal(size=(50, 2)) * 10 ** rng.uniform(-2, 3, size=(50, 1))
    g = GradientField(nodes, rng.uniform(0, 5, 50), rng.uniform(0.1, 1, 50))
    assert np.max(pointwise_energy_gap(ctx(p, rng.normal(size=2)), g, p)) <= 1e-12
    assert energy_equality_check(ctx(p), g)[2] <= 1e-12


@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.floats(-6, 6))
def test_inversion_involution(v, logr):
    u = np.asarray(v, dtype=float)
    if np.linalg.norm(u) < 1e-3:
        u = np.array([1.0, 0, 0])
    x = u / np.linalg.norm(u) * 10.0**logr
    m = InversionMap(2.0, 3)
    assert np.max(np.abs(m(m(x)) - x)) <= 1e-12 * max(1.0, np.linalg.norm(x))


def test_inversion_with_centre_round_trip():
    m = InversionMap(2.0, 2, np.array([0.5, -1.0]))
    x = np.random.default_rng(0).normal(size=(20, 2)) * 5
    assert np.allclose(m.inverse(m(x)), x, atol=1e-12)


def test_invert_half_space_is_unit_ball():
    m = InversionMap(2.0, 3)
    img = invert_domain(m, DomainSpec(HalfSpace([0, 0, 1], 0.5)))
    reg = img.region
    assert reg.__class__.__name__ == "Ball"
    assert np.allclose(np.asarray(reg.center, float), [0, 0, 1]) and float(reg.radius) == 1.0
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(500, 3)) * 3
    assert np.array_equal(img.membership(pts), np.sum(pts**2, axis=1) < 2 * pts[:, 2])


def test_unit_sphere_fixed():
    m = InversionMap(3.0, 2)
    th = np.linspace(0, 2 * math.pi, 17)
    x = np.column_stack([np.cos(th), np.sin(th)])
    assert np.allclose(np.linalg.norm(m(x), axis=1), 1.0)


def test_invert_domain_rejects_centre_in_closure():
    with pytest.raises(ValueError):
        invert_domain(InversionMap(2.0, 2), DomainSpec(HalfSpace([0, 1], 0)))


def test_invert_gradient_examples():
    m = InversionMap(2.0, 2)
    g0 = GradientField.radial(lambda x: np.zeros(len(x)), 1, 2, 1 / 32)
    _, e0, e1, gap = invert_gradient_and_energy(m, g0)
    assert e0 == e1 == 0.0
    g = GradientField.radial(lambda x: 1 / np.linalg.norm(x, axis=1), 1, 2, 1 / 256)
    _, e0, e1, gap = invert_gradient_and_energy(m, g)
    assert e0 == pytest.approx(2 * math.pi * math.log(2), rel=1e-5)
    assert e1 == pytest.approx(e0, rel=1e-12)
    m3 = InversionMap(3.0, 2)
    g1 = GradientField.radial(lambda x: np.ones(len(x)), 1, 2, 1 / 128)
    gh, e0, e1, gap = invert_gradient_and_energy(m3, g1)
    assert e0 == pytest.approx(3 * math.pi, rel=1e-9)
    # image side: g_hat = |y|^-2 on 1/2 < |y| < 1 against |y|^(2(p-n)) dy
    oracle = 2 * math.pi * integrate.quad(lambda s: s ** (2 * (3 - 2)) * s ** (-2 * 3) * s, 0.5, 1)[0]
    assert oracle == pytest.approx(3 * math.pi, rel=1e-12)
    assert gap <= 1e-12


def test_energy_gap_under_independent_grids_is_second_order():
    p = 3.0
    m = InversionMap(p, 2)

    def g(x):
        r = np.linalg.norm(x, axis=1)
        return r**-1.0 * (1 + 0.3 * x[:, 0] / r)

    gaps = []
    for h in (1 / 32, 1 / 64):
        e0 = energy(GradientField.radial(g, 1, 2, h), None, p)
        Y = GradientField.radial(lambda y: g(m.inverse(y)) * np.sum(y * y, axis=1) ** -1, 0.5, 1, h / 2)
        Y = GradientField(Y.nodes, Y.values, Y.volumes, "inverted")
        gaps.append(abs(e0 - energy(Y, InversionDensity(p, 2), p)) / e0)
    assert 0.2 < gaps[1] / gaps[0] < 0.3


def test_admissibility_threshold():
    assert admissibility_check(2, 2) and admissibility_check(2, 3)
    assert not admissibility_check(1.4, 3)
    assert not admissibility_check(1.5, 3)
    assert np.all(InversionDensity(2.0, 2).evaluate(np.random.default_rng(0).normal(size=(5, 2))) == 1.0)


@given(st.floats(1.01, 6), st.integers(2, 5))
def test_admissibility_monotone(p, n):
    if admissibility_check(p, n):
        assert admissibility_check(p + 0.5, n)
    assert admissibility_check(p, n) == (p > n / 2)


def test_modulus_examples():
    fam = AnnulusRadialFamily(1.0, math.e)
    assert fam.modulus(2.0) == pytest.approx(2 * math.pi)
    m0, m1, gap = modulus_invariance_check(ctx(), fam)
    assert m0 == pytest.approx(2 * math.pi, rel=1e-9) and gap <= 1e-6
    m0, m1, gap = modulus_invariance_check(ctx(3.0, (0.4, -0.2)), AnnulusRadialFamily(1.0, 2.0), 3.0)
    assert gap <= 1e-6
    mods = [AnnulusRadialFamily(1.0, R).modulus(2.0) for R in (3.0, 2.0, 1.5, 1.1, 1.01)]
    assert all(b > a for a, b in zip(mods, mods[1:]))


def test_frame_and_shape_validation():
    with pytest.raises(ValueError):
        GradientField(np.zeros((2, 2)), [1.0, -1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        GradientField(np.zeros((2, 2)), [1.0], [1.0, 1.0])
    with pytest.raises(FrameError):
        GradientField(np.zeros((1, 2)), [1.0], [1.0], frame="polar")
