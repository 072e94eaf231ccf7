"""Weights and measures on R^n and on its sphericalization.

Densities are with respect to Lebesgue measure.  The Muckenhoupt checker
samples three families of balls (centred at the singularity, large
off-centre balls containing it, small balls away from it) and turns the
sampled quotients into a verdict with explicit, recorded thresholds.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .geometry import SphericalizationContext, _check_standing_assumption, unit_ball_volume

__all__ = [
    "WeightSpec",
    "Lebesgue",
    "PowerWeight",
    "SphericalizationDensity",
    "MuADensity",
    "InversionDensity",
    "NonIntegrableWeightError",
    "p_admissible",
    "BallSample",
    "ball_quadrature",
    "BallSamplerConfig",
    "ApReport",
    "mu_a_density",
    "muhat_density",
    "mu_a_total_mass",
    "ap_quotient",
    "a1_quotient",
    "centered_power_quotient",
    "check_ap",
    "muhat_ball_at_infinity",
    "ball_measure_scaling_at_infinity",
    "infinity_has_zero_capacity",
]


class NonIntegrableWeightError(ValueError):
    """The power weight is not locally integrable at its centre."""


def p_admissible(p: float, n: int) -> bool:
    """Whether ``|y|^(2(p-n))`` is locally integrable at the origin of R^n."""
    return p > n / 2


class WeightSpec:
    """A positive density on R^n, possibly singular at one point."""

    n: int
    singular_point: np.ndarray | None = None
    #: exponent of the power behaviour at the singular point, if any
    singular_exponent: float = 0.0

    def evaluate(self, x) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x):
        return self.evaluate(x)

    def is_singular(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.singular_point is None or self.singular_exponent == 0:
            return np.zeros(x.shape[:-1], dtype=bool)
        return np.all(x == self.singular_point, axis=-1)

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Lebesgue(WeightSpec):
    n: int

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        return np.ones(x.shape[:-1])

    def to_dict(self):
        return {"kind": "lebesgue", "n": self.n}


@dataclass(frozen=True, eq=False)
class PowerWeight(WeightSpec):
    """``w(x) = |x - c|^alpha``."""

    center: np.ndarray
    alpha: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        object.__setattr__(self, "center", c)

    @property
    def n(self):
        return int(self.center.shape[0])

    @property
    def singular_point(self):
        return self.center

    @property
    def singular_exponent(self):
        return self.alpha

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x - self.center, axis=-1)
        with np.errstate(divide="ignore"):
            return r**self.alpha

    def to_dict(self):
        return {"kind": "power", "center": self.center.tolist(), "alpha": self.alpha}


@dataclass(frozen=True)
class SphericalizationDensity(WeightSpec):
    """``(1 + |x - a|)^(-2p)``, the density of the sphericalized measure."""

    ctx: SphericalizationContext

    @property
    def n(self):
        return self.ctx.n

    def evaluate(self, x):
        return (1.0 + self.ctx.dist_to_base(x)) ** (-2.0 * self.ctx.p)

    def to_dict(self):
        return {"kind": "sphericalization", "a": self.ctx.base_point.tolist(), "p": self.ctx.p}


@dataclass(frozen=True)
class MuADensity(WeightSpec):
    """``mu(B(a, 1 + |x - a|))^(-2)`` for Lebesgue mu."""

    ctx: SphericalizationContext

    @property
    def n(self):
        return self.ctx.n

    def evaluate(self, x):
        vn = unit_ball_volume(self.ctx.n)
        return (vn * (1.0 + self.ctx.dist_to_base(x)) ** self.ctx.n) ** -2.0

    def to_dict(self):
        return {"kind": "mu_a", "a": self.ctx.base_point.tolist()}


@dataclass(frozen=True)
class InversionDensity(WeightSpec):
    """``|y|^(2(p - n))``, the density making spherical inversion energy-preserving."""

    p: float
    n: int

    def __post_init__(self):
        if not p_admissible(self.p, self.n):
            raise ValueError(
                f"|y|^(2(p-n)) is not locally integrable for p={self.p}, n={self.n}; need p > n/2"
            )

    @property
    def singular_point(self):
        return np.zeros(self.n)

    @property
    def singular_exponent(self):
        return 2.0 * (self.p - self.n)

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        with np.errstate(divide="ignore"):
            return r ** (2.0 * (self.p - self.n))

    def to_dict(self):
        return {"kind": "inversion", "p": self.p, "n": self.n}


def mu_a_density(ctx: SphericalizationContext, x):
    return MuADensity(ctx).evaluate(x)


def muhat_density(ctx: SphericalizationContext, x):
    return SphericalizationDensity(ctx).evaluate(x)


def mu_a_total_mass(ctx: SphericalizationContext) -> float:
    """Total mass of ``mu_a`` by radial quadrature (always at most 2/mu(B(a,1)))."""
    n = ctx.n
    vn = unit_ball_volume(n)

    def f(t):
        return n * vn * t ** (n - 1) / (vn * (1.0 + t) ** n) ** 2

    val, _ = integrate.quad(f, 0.0, np.inf, epsabs=1e-14, epsrel=1e-12, limit=200)
    return float(val)


# -- ball sampling --------------------------------------------------------------------


def _sphere_directions(n: int, m: int, rng: np.random.Generator | None = None):
    """Directions and weights (summing to the sphere area) on S^{n-1}."""
    area = n * unit_ball_volume(n)
    if n == 2:
        th = 2 * np.pi * (np.arange(m) + 0.5) / m
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
    elif n == 3:
        k = np.arange(m) + 0.5
        z = 1 - 2 * k / m
        phi = np.pi * (1 + 5**0.5) * k
        s = np.sqrt(1 - z**2)
        dirs = np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)
    else:
        rng = rng or np.random.default_rng(0)
        d = rng.standard_normal((m, n))
        dirs = d / np.linalg.norm(d, axis=1, keepdims=True)
    return dirs, np.full(m, area / m)


@dataclass
class BallSample:
    """Quadrature nodes for a Euclidean ball; weights sum to its volume."""

    center: np.ndarray
    radius: float
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")
        d = np.linalg.norm(self.nodes - self.center, axis=1)
        if np.any(d >= self.radius * (1 + 1e-12)) or np.any(self.weights <= 0):
            raise ValueError("quadrature nodes must lie in the ball with positive weights")

    @property
    def volume(self) -> float:
        n = self.center.shape[0]
        return unit_ball_volume(n) * self.radius**n


def ball_quadrature(center, radius: float, nodes_per_ball: int = 64) -> BallSample:
    """Product rule: Gauss-Legendre in radius times uniform directions."""
    center = np.asarray(center, dtype=float)
    n = center.shape[0]
    if n == 2:
        n_r = max(1, int(round(math.sqrt(nodes_per_ball))))
    else:
        n_r = 4
    n_dir = max(1, nodes_per_ball // n_r)
    t, wt = np.polynomial.legendre.leggauss(n_r)
    t = 0.5 * (t + 1) * radius
    wt = 0.5 * wt * radius * t ** (n - 1)
    dirs, wd = _sphere_directions(n, n_dir)
    nodes = center + (t[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    weights = (wt[:, None] * wd[None, :]).reshape(-1)
    return BallSample(center, float(radius), nodes, weights)


def _average(f_vals, base_vals, w) -> float:
    return float(np.sum(f_vals * base_vals * w) / np.sum(base_vals * w))


def _ball_values(weight: WeightSpec, ball: BallSample, base_measure: WeightSpec | None):
    x = ball.nodes
    keep = ~weight.is_singular(x)
    if not np.all(keep):
        warnings.warn(
            f"{int(np.sum(~keep))} quadrature node(s) hit the weight's singular point and were skipped",
            RuntimeWarning,
            stacklevel=3,
        )
    x = x[keep]
    q = ball.weights[keep]
    wv = weight.evaluate(x)
    bv = np.ones(len(x)) if base_measure is None else base_measure.evaluate(x)
    return wv, bv, q


def ap_quotient(weight: WeightSpec, p: float, ball: BallSample, base_measure: WeightSpec | None = None) -> float:
    """Muckenhoupt quotient ``avg(w) * avg(w^(1/(1-p)))^(p-1)`` over a sampled ball.

    ``base_measure`` is a density w.r.t. Lebesgue measure (``None`` means
    Lebesgue).  Nodes sitting exactly on the weight's singular point are
    skipped with a ``RuntimeWarning``.
    """
    if p <= 1:
        raise ValueError("the A_p quotient needs p > 1; use a1_quotient for p = 1")
    wv, bv, q = _ball_values(weight, ball, base_measure)
    a = _average(wv, bv, q)
    b = _average(wv ** (1.0 / (1.0 - p)), bv, q)
    return a * b ** (p - 1.0)


def a1_quotient(weight: WeightSpec, ball: BallSample, base_measure: WeightSpec | None = None) -> float:
    """``avg(w) / essinf(w)``, with the infimum estimated by the nodal minimum."""
    wv, bv, q = _ball_values(weight, ball, base_measure)
    return _average(wv, bv, q) / float(np.min(wv))


# -- power weights: closed forms -----------------------------------------------------


def _centered_power_average(beta: float, n: int, r: float, core: float = 0.0) -> float:
    """Average of |x|^beta over B(0,r) minus B(0,core), normalised by |B(0,r)|."""
    s = beta + n
    if core == 0.0:
        return n / s * r**beta if s > 0 else math.inf
    if abs(s) < 1e-14:
        return n * math.log(r / core) / r**n
    # n (r^s - core^s) / (s r^n), written to avoid overflow for tiny cores
    if s > 0:
        return n * r**beta * (1.0 - (core / r) ** s) / s
    return n * core**s * (1.0 - (core / r) ** (-s)) / (-s) / r**n


def centered_power_quotient(alpha: float, p: float, n: int) -> float:
    """Exact A_p quotient of ``|x|^alpha`` over any ball centred at 0 (scale invariant)."""
    beta = alpha / (1.0 - p)
    if alpha + n <= 0 or beta + n <= 0:
        return math.inf
    return n / (n + alpha) * (n / (n + beta)) ** (p - 1.0)


def _ray_ball_interval(c, u, z, r):
    """Parameter interval of {c + t u, t >= 0} inside the open ball B(z, r)."""
    m = c - z
    b = u @ m
    cc = m @ m - r * r
    disc = b * b - cc
    t_lo = np.full(len(u), np.nan)
    t_hi = np.full(len(u), np.nan)
    ok = disc > 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    lo = -b - sq
    hi = -b + sq
    ok &= hi > 0
    t_lo[ok] = np.maximum(lo[ok], 0.0)
    t_hi[ok] = hi[ok]
    return t_lo, t_hi


def _power_ball_average_polar(center_c, alpha, z, r, n_dir) -> float:
    """Average of |x-c|^alpha over B(z,r) via polar coordinates about c.

    The radial integral along each ray from ``c`` is done in closed form, so
    the singularity at ``c`` costs nothing; only the angular rule is discrete.
    The ball volume comes from the same rule, so constants average exactly.
    """
    c = np.asarray(center_c, dtype=float)
    n = c.shape[0]
    dirs, wd = _sphere_directions(n, n_dir)
    lo, hi = _ray_ball_interval(c, dirs, np.asarray(z, dtype=float), r)
    s = alpha + n
    ok = ~np.isnan(lo)
    lo, hi, wd = lo[ok], hi[ok], wd[ok]
    if s > 0:
        rad = (hi**s - lo**s) / s
    elif np.any(lo == 0):
        return math.inf
    elif abs(s) < 1e-14:
        rad = np.log(hi / lo)
    else:
        rad = (hi**s - lo**s) / s
    vol = np.sum(wd * (hi**n - lo**n)) / n
    return float(np.sum(wd * rad) / vol)


def _power_ball_essinf(c, alpha, z, r) -> float:
    d = float(np.linalg.norm(np.asarray(z) - np.asarray(c)))
    if alpha <= 0:
        return (d + r) ** alpha
    return max(d - r, 0.0) ** alpha


@dataclass
class BallSamplerConfig:
    """Ball sampling knobs for :func:`check_ap` (all surfaced on the CLI)."""

    seed: int = 0
    radius_min: float = 1e-3
    radius_max: float = 1.0
    balls_per_decade: int = 10
    nodes_per_ball: int = 64
    bound_factor: float = 10.0
    slope_tol: float = 0.05
    #: inner cut-off, relative to radius_min, for the centred closed form
    core_ratio: float = 1e-12

    def radii(self) -> np.ndarray:
        decades = math.log10(self.radius_max / self.radius_min)
        m = max(2, int(round(decades * self.balls_per_decade)) + 1)
        return np.logspace(math.log10(self.radius_min), math.log10(self.radius_max), m)


@dataclass
class ApReport:
    p: float
    weight: dict
    quotients: list
    max_quotient: float
    verdict: str
    slope: float
    prediction: float
    centered: list = field(default_factory=list)
    large_offcenter: list = field(default_factory=list)
    small_offcenter: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("max_quotient", "slope", "prediction"):
            if not math.isfinite(d[k]):
                d[k] = str(d[k])
        for k in ("quotients", "centered", "large_offcenter", "small_offcenter"):
            d[k] = [v if math.isfinite(v) else str(v) for v in d[k]]
        return d


def check_ap(weight: PowerWeight, p: float, config: BallSamplerConfig | None = None) -> ApReport:
    """Sample balls of the three types and classify the power weight.

    ``p == 1`` checks the A_1 condition (average over essential infimum).

    Verdict rules: *diverging* if the log-log slope of the centred quotients
    against the radius exceeds ``slope_tol`` in absolute value (or a quotient
    is infinite); *bounded* if every quotient is at most ``bound_factor``
    times the exact centred value; *inconclusive* otherwise.
    """
    config = config or BallSamplerConfig()
    if not isinstance(weight, PowerWeight):
        raise TypeError("check_ap handles power weights |x-c|^alpha")
    n = weight.n
    alpha = float(weight.alpha)
    c = weight.center
    if alpha <= -n:
        raise NonIntegrableWeightError(f"|x-c|^{alpha} is not locally integrable in R^{n}")
    if p < 1:
        raise ValueError("p must be at least 1")
    rng = np.random.default_rng(config.seed)
    radii = config.radii()
    core = config.core_ratio * config.radius_min
    a1 = p == 1

    def quotient_from_averages(avg_w, avg_dual, essinf=None):
        if a1:
            return avg_w / essinf if essinf > 0 else math.inf
        return avg_w * avg_dual ** (p - 1.0)

    beta = None if a1 else alpha / (1.0 - p)
    centered = []
    for r in radii:
        aw = _centered_power_average(alpha, n, r, core)
        if a1:
            ess = r**alpha if alpha <= 0 else core**alpha
            centered.append(quotient_from_averages(aw, None, ess))
        else:
            centered.append(quotient_from_averages(aw, _centered_power_average(beta, n, r, core)))

    def random_dir():
        d = rng.standard_normal(n)
        return d / np.linalg.norm(d)

    large, small = [], []
    for r in radii:
        # large: r > d(z,c)/2, the ball may contain c
        z = c + rng.uniform(0.0, 2.0) * r * random_dir()
        aw = _power_ball_average_polar(c, alpha, z, r, config.nodes_per_ball)
        if a1:
            large.append(quotient_from_averages(aw, None, _power_ball_essinf(c, alpha, z, r)))
        else:
            ad = _power_ball_average_polar(c, beta, z, r, config.nodes_per_ball)
            large.append(quotient_from_averages(aw, ad))
        # small: r <= d(z,c)/2, smooth weight on the ball
        z = c + rng.uniform(2.0, 20.0) * r * random_dir()
        ball = ball_quadrature(z, r, config.nodes_per_ball)
        if a1:
            small.append(a1_quotient(weight, ball))
        else:
            small.append(ap_quotient(weight, p, ball))

    logq = np.log(np.asarray(centered))
    if np.all(np.isfinite(logq)):
        slope = float(np.polyfit(np.log(radii), logq, 1)[0])
    else:
        slope = math.inf
    prediction = (n / (n + alpha)) if a1 and alpha <= 0 else (math.inf if a1 else centered_power_quotient(alpha, p, n))
    allq = centered + large + small
    qmax = float(np.max(allq))
    if not math.isfinite(slope) or not math.isfinite(qmax) or abs(slope) > config.slope_tol:
        verdict = "diverging"
    elif math.isfinite(prediction) and qmax <= config.bound_factor * prediction:
        verdict = "bounded"
    else:
        verdict = "inconclusive"
    return ApReport(
        p=float(p),
        weight=weight.to_dict(),
        quotients=[float(q) for q in allq],
        max_quotient=qmax,
        verdict=verdict,
        slope=slope,
        prediction=prediction,
        centered=[float(q) for q in centered],
        large_offcenter=[float(q) for q in large],
        small_offcenter=[float(q) for q in small],
        config=asdict(config),
    )


# -- behaviour at infinity -----------------------------------------------------------


def muhat_ball_at_infinity(ctx: SphericalizationContext, r: float) -> float:
    """Sphericalized measure of ``{x : d_a(x, inf) < r}``, i.e. ``|x - a| > 1/r - 1``."""
    n, p = ctx.n, ctx.p
    T = 1.0 / r - 1.0
    area = n * unit_ball_volume(n)

    # substitute s = 1/(1+t) to map (T, inf) onto (0, r)
    def f(s):
        t = 1.0 / s - 1.0
        return area * t ** (n - 1) * s ** (2 * p) / s**2

    val, _ = integrate.quad(f, 0.0, 1.0 / (1.0 + T), epsabs=0.0, epsrel=1e-12, limit=200)
    return float(val)


def ball_measure_scaling_at_infinity(ctx: SphericalizationContext, radii: Sequence[float]) -> float:
    """Least-squares exponent of ``r -> muhat(ball(inf, r))``; close to ``2p - n``."""
    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 0) or np.any(radii >= 0.25):
        raise ValueError("radii must lie in (0, 1/4)")
    if math.log10(radii.max() / radii.min()) < 2 - 1e-9:
        raise ValueError("radii must span at least two decades")
    m = np.array([muhat_ball_at_infinity(ctx, r) for r in radii])
    return float(np.polyfit(np.log(radii), np.log(m), 1)[0])


def infinity_has_zero_capacity(p: float, Q: float) -> bool:
    """Whether {inf} is a null set for the sphericalized capacity: ``p >= Q``."""
    _check_standing_assumption(float(p), float(Q))
    return p >= Q
