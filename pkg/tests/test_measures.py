from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sphericalize.geometry import SphericalizationContext, unit_ball_volume
from sphericalize.measures import (
    BallSamplerConfig,
    InversionDensity,
    Lebesgue,
    NonIntegrableWeightError,
    PowerWeight,
    SphericalizationDensity,
    a1_quotient,
    ap_quotient,
    ball_measure_scaling_at_infinity,
    ball_quadrature,
    centered_power_quotient,
    check_ap,
    infinity_has_zero_capacity,
    mu_a_density,
    mu_a_total_mass,
    muhat_density,
    p_admissible,
)


def ctx(n=2, p=2.0, a=None):
    return SphericalizationContext(np.zeros(n) if a is None else np.asarray(a, float), p)


def test_mu_a_density_examples():
    c = ctx()
    assert mu_a_density(c, [0, 0]) == pytest.approx(1 / math.pi**2)
    assert mu_a_density(c, [1, 0]) == pytest.approx((4 * math.pi) ** -2)


def test_muhat_density_examples():
    assert muhat_density(ctx(), [0, 0]) == 1.0
    assert muhat_density(ctx(), [1, 0]) == pytest.approx(1 / 16)


@pytest.mark.parametrize("n,a", [(2, (0, 0)), (2, (3, -1)), (3, (0, 0, 0)), (3, (1, 2, 0))])
def test_mu_a_total_mass_bound(n, a):
    m = mu_a_total_mass(ctx(n, 2.0, a))
    assert m < 0.99 * 2 / unit_ball_volume(n)


@given(st.lists(st.floats(-30, 30), min_size=2, max_size=2), st.sampled_from([1.5, 2.0, 3.0]))
def test_density_ratio_identity(x, p):
    c = ctx(2, p)
    d = float(np.linalg.norm(x))
    ratio = muhat_density(c, x) / mu_a_density(c, x)
    v = unit_ball_volume(2) * (1 + d) ** 2
    assert ratio == pytest.approx(v**2 * (1 + d) ** (2 * (2 - p)) / (1 + d) ** 4, rel=1e-12)


def test_ap_quotient_examples():
    ball = ball_quadrature(np.zeros(2), 1.0, 64)
    assert ap_quotient(PowerWeight(np.zeros(2), 0.0), 2.0, ball) == pytest.approx(1.0)
    ball = ball_quadrature(np.array([5.0, 1.0]), 0.5, 64)
    assert ap_quotient(PowerWeight(np.zeros(2), 0.0), 3.0, ball) == pytest.approx(1.0)
    # centred ball: closed form (4/5)(4/3)
    assert centered_power_quotient(0.5, 2.0, 2) == pytest.approx(16 / 15)


def test_boundary_exponent_diverges():
    rep = check_ap(PowerWeight(np.zeros(2), 2.0), 2.0)
    assert rep.verdict == "diverging"


def test_check_ap_examples():
    assert check_ap(PowerWeight(np.zeros(2), 1.0), 3.0).verdict == "bounded"
    r0 = check_ap(PowerWeight(np.zeros(2), 0.0), 2.0)
    assert r0.verdict == "bounded"
    assert np.allclose(r0.quotients, 1.0, atol=1e-9)
    assert check_ap(PowerWeight(np.zeros(2), 2.5), 2.0).verdict == "diverging"


def test_check_ap_reproducible_and_serializable():
    cfg = BallSamplerConfig(seed=7)
    a = check_ap(PowerWeight(np.array([0.5, 0.5]), -1.0), 2.0, cfg).to_dict()
    b = check_ap(PowerWeight(np.array([0.5, 0.5]), -1.0), 2.0, cfg).to_dict()
    assert a == b
    assert a["config"]["seed"] == 7


def test_check_ap_rejects_nonintegrable():
    with pytest.raises(NonIntegrableWeightError):
        check_ap(PowerWeight(np.zeros(2), -2.0), 2.0)


def test_a1_examples():
    ball = ball_quadrature(np.zeros(2), 1.0, 64)
    assert a1_quotient(PowerWeight(np.zeros(2), 0.0), ball) == pytest.approx(1.0)
    assert check_ap(PowerWeight(np.zeros(2), -1.0), 1.0).verdict == "bounded"
    assert check_ap(PowerWeight(np.zeros(2), 1.0), 1.0).verdict == "diverging"


@given(st.floats(-1.8, 1.8), st.floats(1.2, 4.0), st.floats(-3, 3), st.floats(-3, 3), st.floats(0.01, 2.0))
def test_ap_quotient_at_least_one(alpha, p, cx, cy, r):
    ball = ball_quadrature(np.array([cx, cy]), r, 32)
    assert ap_quotient(PowerWeight(np.zeros(2), alpha), p, ball) >= 1 - 1e-9


@pytest.mark.parametrize("n,p", [(2, 2.0), (2, 1.5), (3, 3.0)])
def test_ball_scaling_examples(n, p):
    slope = ball_measure_scaling_at_infinity(ctx(n, p), np.logspace(-4, -1.5, 12))
    assert abs(slope - (2 * p - n)) <= 0.1


def test_ball_scaling_rejects_short_range():
    with pytest.raises(ValueError):
        ball_measure_scaling_at_infinity(ctx(), [0.01, 0.02])


def test_infinity_capacity_examples():
    assert infinity_has_zero_capacity(2, 2)
    assert not infinity_has_zero_capacity(1.5, 2)
    assert infinity_has_zero_capacity(3, 2)


def test_weights_evaluate():
    x = np.array([[1.0, 0.0], [0.0, 3.0]])
    assert np.allclose(Lebesgue(2).evaluate(x), 1.0)
    assert np.allclose(SphericalizationDensity(ctx()).evaluate(x), [1 / 16, 1 / 256])
    assert np.allclose(InversionDensity(3.0, 2).evaluate(x), [1.0, 9.0])
    assert p_admissible(2.0, 3) and not p_admissible(1.4, 3)
