"""Transport of upper gradients and energies between frames.

Two changes of frame are covered.  Sphericalization keeps the points and
multiplies an upper gradient by ``(1 + |x - a|)^2`` while the measure picks
up ``(1 + |x - a|)^(-2p)``.  Spherical inversion ``x -> x/|x|^2`` moves the
points, divides the gradient by ``|y|^2`` and uses the measure
``|y|^(2(p - n)) dy`` on the image.  In both cases the p-energy is the same
in either frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import integrate

from .domains.csg import (
    Ball,
    DomainSpec,
    HalfSpace,
    Intersect,
    Minus,
    Pullback,
    Region,
    Union,
    Whole,
)
from .geometry import INFINITY, DimensionError, SphericalizationContext, unit_ball_volume
from .measures import InversionDensity, Lebesgue, SphericalizationDensity, WeightSpec, p_admissible

__all__ = [
    "FRAMES",
    "FrameError",
    "GradientField",
    "InversionMap",
    "sphericalize_gradient",
    "unsphericalize_gradient",
    "energy",
    "pointwise_energy_gap",
    "energy_equality_check",
    "invert_domain",
    "invert_gradient_and_energy",
    "admissibility_check",
    "AnnulusRadialFamily",
    "modulus_invariance_check",
    "sphere_area",
]

FRAMES = ("original", "sphericalized", "inverted")


class FrameError(ValueError):
    """A gradient field was used in the wrong frame."""


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere in R^n."""
    return n * unit_ball_volume(n)


@dataclass(frozen=True, eq=False)
class GradientField:
    """Samples of a nonnegative upper gradient with quadrature volumes.

    Attributes
    ----------
    nodes : ndarray, shape (N, n)
    values : ndarray, shape (N,)
        Nonnegative gradient values at the nodes.
    volumes : ndarray, shape (N,)
        Cell volume attached to each node (Lebesgue, in the node's frame).
    frame : str
        One of ``original``, ``sphericalized``, ``inverted``.
    domain : DomainSpec or None
    """

    nodes: np.ndarray
    values: np.ndarray
    volumes: np.ndarray
    frame: str = "original"
    domain: DomainSpec | None = None

    def __post_init__(self):
        nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        values = np.asarray(self.values, dtype=float).reshape(-1)
        volumes = np.asarray(self.volumes, dtype=float).reshape(-1)
        if self.frame not in FRAMES:
            raise FrameError(f"unknown frame {self.frame!r}")
        if not (len(nodes) == len(values) == len(volumes)):
            raise ValueError("nodes, values and volumes must have the same length")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("gradient values must be finite and nonnegative")
        if np.any(volumes <= 0):
            raise ValueError("cell volumes must be positive")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "volumes", volumes)

    @property
    def n(self) -> int:
        return self.nodes.shape[1]

    def require(self, frame: str) -> None:
        if self.frame != frame:
            raise FrameError(f"expected a field in frame {frame!r}, got {self.frame!r}")

    @classmethod
    def on_grid(cls, g: Callable, lo, hi, h: float, domain: DomainSpec | None = None) -> "GradientField":
        """Midpoint-rule cells of side ``h`` covering the box ``[lo, hi]``.

        Cells whose centre lies outside ``domain`` are dropped.
        """
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        axes = [np.arange(a + h / 2, b, h) for a, b in zip(lo, hi)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))
        if domain is not None:
            pts = pts[domain.membership(pts)]
        return cls(pts, g(pts), np.full(len(pts), h ** len(lo)), "original", domain)

    @classmethod
    def radial(cls, g: Callable, r_in: float, r_out: float, h: float, n: int = 2, center=None,
               n_angles: int | None = None) -> "GradientField":
        """Polar midpoint cells on the shell ``r_in < |x - center| < r_out``.

        Radial cells have width ``h`` (adjusted to divide the shell);
        angular cells come from a uniform angle grid (n = 2) or a
        Fibonacci point set with equal solid angles (n = 3).
        """
        center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
        m = max(1, int(round((r_out - r_in) / h)))
        dr = (r_out - r_in) / m
        r = r_in + dr * (np.arange(m) + 0.5)
        if n == 2:
            k = n_angles or max(16, int(math.ceil(2 * math.pi * r_out / h)))
            th = 2 * math.pi * (np.arange(k) + 0.5) / k
            dirs = np.column_stack([np.cos(th), np.sin(th)])
        elif n == 3:
            k = n_angles or max(64, int(math.ceil(4 * math.pi * (r_out / h) ** 2)))
            i = np.arange(k) + 0.5
            z = 1 - 2 * i / k
            phi = math.pi * (1 + math.sqrt(5)) * i
            s = np.sqrt(1 - z * z)
            dirs = np.column_stack([s * np.cos(phi), s * np.sin(phi), z])
        else:
            raise DimensionError("radial grids are available for n = 2 and 3")
        dw = sphere_area(n) / k
        pts = center + (r[:, None, None] * dirs[None, :, :]).reshape(-1, n)
        vol = np.repeat(r ** (n - 1) * dr * dw, k)
        return cls(pts, g(pts), vol, "original", None)


def _check_ctx(ctx: SphericalizationContext, g: GradientField):
    if g.n != ctx.n:
        raise DimensionError(f"field lives in R^{g.n}, context in R^{ctx.n}")


def sphericalize_gradient(ctx: SphericalizationContext, g: GradientField) -> GradientField:
    """``g_hat(x) = g(x) (1 + |x - a|)^2``; the nodes do not move."""
    g.require("original")
    _check_ctx(ctx, g)
    factor = (1.0 + ctx.dist_to_base(g.nodes)) ** 2
    return replace(g, values=g.values * factor, frame="sphericalized")


def unsphericalize_gradient(ctx: SphericalizationContext, g: GradientField) -> GradientField:
    g.require("sphericalized")
    _check_ctx(ctx, g)
    factor = (1.0 + ctx.dist_to_base(g.nodes)) ** 2
    return replace(g, values=g.values / factor, frame="original")


def energy(g: GradientField, measure: WeightSpec | None, p: float) -> float:
    """Midpoint-rule ``sum g^p w vol`` (Lebesgue when ``measure`` is None)."""
    w = 1.0 if measure is None else measure.evaluate(g.nodes)
    terms = g.values**p * w * g.volumes
    return float(math.fsum(terms))


def pointwise_energy_gap(ctx: SphericalizationContext, g: GradientField, p: float) -> np.ndarray:
    """Nodewise relative difference between ``g^p`` and ``g_hat^p (1+d)^(-2p)``."""
    gh = sphericalize_gradient(ctx, g)
    a = g.values**p
    b = gh.values**p * SphericalizationDensity(_ctx_p(ctx, p)).evaluate(g.nodes)
    scale = np.maximum(np.abs(a), np.abs(b))
    with np.errstate(invalid="ignore", divide="ignore"):
        gap = np.where(scale > 0, np.abs(a - b) / scale, 0.0)
    return gap


def _ctx_p(ctx: SphericalizationContext, p: float) -> SphericalizationContext:
    if p == ctx.p:
        return ctx
    return SphericalizationContext(ctx.base_point, p)


def energy_equality_check(ctx: SphericalizationContext, g: GradientField, p: float | None = None):
    """Energies of ``g`` against Lebesgue and of ``g_hat`` against the sphericalized measure.

    Returns
    -------
    (E_original, E_sphericalized, relative_gap)
    """
    g.require("original")
    p = ctx.p if p is None else p
    c = _ctx_p(ctx, p)
    e0 = energy(g, None, p)
    e1 = energy(sphericalize_gradient(c, g), SphericalizationDensity(c), p)
    big = max(abs(e0), abs(e1))
    gap = 0.0 if big == 0 else abs(e0 - e1) / big
    return e0, e1, gap


@dataclass(frozen=True)
class InversionMap:
    """Spherical inversion ``Phi(x) = (x - c)/|x - c|^2``.

    With the default centre ``c = 0`` the map is an involution of
    ``R^n \\ {0}`` and swaps 0 with infinity.  For other centres the inverse
    is ``y -> c + y/|y|^2``.
    """

    p: float
    n: int
    center: np.ndarray | None = None

    def __post_init__(self):
        c = np.zeros(self.n) if self.center is None else np.asarray(self.center, dtype=float)
        if c.shape != (self.n,):
            raise DimensionError("centre has the wrong dimension")
        object.__setattr__(self, "center", c)

    def forward(self, x):
        if x is INFINITY:
            return np.zeros(self.n)
        x = np.asarray(x, dtype=float)
        d = x - self.center
        r2 = np.sum(d * d, axis=-1, keepdims=True)
        if np.any(r2 == 0):
            if d.ndim == 1:
                return INFINITY
            raise ValueError("the inversion centre maps to infinity; pass it separately")
        return d / r2

    __call__ = forward

    def inverse(self, y):
        if y is INFINITY:
            return self.center.copy()
        y = np.asarray(y, dtype=float)
        r2 = np.sum(y * y, axis=-1, keepdims=True)
        if np.any(r2 == 0):
            if y.ndim == 1:
                return INFINITY
            raise ValueError("the origin maps to infinity; pass it separately")
        return self.center + y / r2

    def scale(self, y):
        """Local length scale |dPhi| at the original point ``Phi^{-1}(y)``, as a function of y."""
        y = np.asarray(y, dtype=float)
        return np.sum(y * y, axis=-1)

    @property
    def density(self) -> InversionDensity:
        return InversionDensity(self.p, self.n)


def admissibility_check(p: float, n: int) -> bool:
    """Whether the inversion weight ``|y|^(2(p-n))`` is locally integrable (p > n/2)."""
    return p_admissible(p, n)


def _invert_region(m: InversionMap, reg: Region) -> Region:
    """Exact images of half-spaces and balls; other primitives by pullback."""
    c = m.center
    n = m.n
    if isinstance(reg, Whole):
        return reg
    if isinstance(reg, HalfSpace):
        nrm = reg.normal / np.linalg.norm(reg.normal)
        s = reg.offset / np.linalg.norm(reg.normal) - nrm @ c
        if s == 0:
            return HalfSpace(nrm, 0)
        cen, rad = nrm / (2 * s), 1 / (2 * abs(s))
        if s > 0:
            return Ball(cen, rad)
        return Minus(Whole(n), Ball(cen, rad))
    if isinstance(reg, Ball):
        q = reg.center - c
        qq = q @ q
        rr = reg.radius**2
        if qq == rr:
            # sphere through the centre: image is a half-space
            nrm = q / math.sqrt(qq)
            return HalfSpace(nrm, 1 / (2 * math.sqrt(qq)))
        cen = q / (qq - rr)
        rad = reg.radius / abs(qq - rr)
        if qq > rr:
            return Ball(cen, rad)
        return Minus(Whole(n), Ball(cen, rad))
    if isinstance(reg, (Union, Intersect, Minus)):
        kids = [_invert_region(m, k) for k in reg.children]
        return type(reg)(*kids)
    return Pullback(reg, m.inverse, lambda y: m.scale(y), label="inversion")


def invert_domain(m: InversionMap, dom: DomainSpec) -> DomainSpec:
    """Image ``Phi(Omega)`` as a domain.

    The inversion centre must lie outside the closure of Omega, so that the
    image is bounded unless Omega is unbounded (then 0 is a boundary point
    of the image, the image of infinity).
    """
    if dom.n != m.n:
        raise DimensionError("domain and map dimensions differ")
    if bool(dom.region.closure_contains(m.center[None, :])[0]):
        raise ValueError("the inversion centre lies in the closure of the domain")
    return DomainSpec(_invert_region(m, dom.region), name=f"inverted({dom.name})")


def invert_gradient_and_energy(m: InversionMap, g: GradientField, p: float | None = None):
    """Push ``g`` forward through the inversion with matched nodes.

    Nodes move to ``y = Phi(x)``, values become ``g(x)/|y|^2`` and cell
    volumes are scaled by the Jacobian ``|x - c|^(-2n)``.

    Returns
    -------
    (GradientField, E_Omega, E_Omega_hat, relative_gap)
    """
    g.require("original")
    if g.n != m.n:
        raise DimensionError("field and map dimensions differ")
    p = m.p if p is None else p
    d = g.nodes - m.center
    r2 = np.sum(d * d, axis=1)
    if np.any(r2 == 0) or not np.all(np.isfinite(r2)):
        raise ValueError("gradient support must avoid the inversion centre and infinity")
    y = d / r2[:, None]
    yy = 1.0 / r2
    gh = GradientField(y, g.values / yy, g.volumes * r2 ** (-m.n), "inverted", None)
    e0 = energy(g, None, p)
    e1 = energy(gh, InversionDensity(p, m.n), p)
    big = max(e0, e1)
    gap = 0.0 if big == 0 else abs(e0 - e1) / big
    return gh, e0, e1, gap


@dataclass(frozen=True)
class AnnulusRadialFamily:
    """Radial segments joining the spheres ``|x - center| = r_in`` and ``= r_out``."""

    r_in: float
    r_out: float
    center: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        if not 0 < self.r_in < self.r_out:
            raise ValueError("need 0 < r_in < r_out")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    @property
    def n(self):
        return self.center.shape[0]

    def radial_integral(self, p: float) -> float:
        """``int_{r_in}^{r_out} t^((1-n)/(p-1)) dt``."""
        k = (1 - self.n) / (p - 1)
        if abs(k + 1) < 1e-14:
            return math.log(self.r_out / self.r_in)
        return (self.r_out ** (k + 1) - self.r_in ** (k + 1)) / (k + 1)

    def modulus(self, p: float) -> float:
        """Closed-form p-modulus ``omega_{n-1} L^(1-p)``."""
        return sphere_area(self.n) * self.radial_integral(p) ** (1 - p)

    def extremal_density(self, p: float):
        L = self.radial_integral(p)
        k = (1 - self.n) / (p - 1)
        return lambda t: t**k / L


def modulus_invariance_check(ctx: SphericalizationContext, family: AnnulusRadialFamily, p: float | None = None):
    """Modulus of a radial family before and after sphericalization.

    The original modulus integrates ``rho^p`` for the extremal density
    ``rho``.  The sphericalized one integrates ``rho_hat^p`` against the
    sphericalized measure, where ``rho_hat = rho (1 + |x - a|)^2``; the
    check also confirms that ``rho_hat`` is admissible for sphericalized
    arc length along the radial segments.  When ``a`` is the annulus centre
    the integrals are one-dimensional; otherwise a product polar rule is
    used (n = 2 or 3).

    Returns
    -------
    (Mod_original, Mod_sphericalized, relative_gap)
    """
    p = ctx.p if p is None else p
    if not isinstance(family, AnnulusRadialFamily):
        raise TypeError("only annulus radial families are supported")
    if family.n != ctx.n:
        raise DimensionError("family and context dimensions differ")
    n = ctx.n
    rho = family.extremal_density(p)
    area = sphere_area(n)
    ri, ro = family.r_in, family.r_out
    opts = dict(epsabs=0.0, epsrel=1e-13, limit=200)
    m0 = area * integrate.quad(lambda t: rho(t) ** p * t ** (n - 1), ri, ro, **opts)[0]
    off = ctx.base_point - family.center
    if np.allclose(off, 0):
        def f(t):
            s = (1 + t) ** 2
            return (rho(t) * s) ** p * (1 + t) ** (-2 * p) * t ** (n - 1)

        m1 = area * integrate.quad(f, ri, ro, **opts)[0]
        adm = integrate.quad(lambda t: rho(t) * (1 + t) ** 2 * (1 + t) ** -2, ri, ro, **opts)[0]
    else:
        m1, adm = _modulus_polar(ctx, family, rho, p)
    if abs(adm - 1) > 1e-8:
        raise RuntimeError(f"transformed density fails admissibility: integral {adm}")
    gap = abs(m0 - m1) / max(m0, m1)
    return m0, m1, gap


def _modulus_polar(ctx, family, rho, p):
    n = ctx.n
    x, w = np.polynomial.legendre.leggauss(64)
    ri, ro = family.r_in, family.r_out
    t = 0.5 * (ro - ri) * (x + 1) + ri
    wt = 0.5 * (ro - ri) * w
    if n == 2:
        k = 512
        th = 2 * math.pi * (np.arange(k) + 0.5) / k
        dirs = np.column_stack([np.cos(th), np.sin(th)])
    elif n == 3:
        k = 4096
        i = np.arange(k) + 0.5
        z = 1 - 2 * i / k
        ph = math.pi * (1 + math.sqrt(5)) * i
        s = np.sqrt(1 - z * z)
        dirs = np.column_stack([s * np.cos(ph), s * np.sin(ph), z])
    else:
        raise DimensionError("off-centre modulus checks need n = 2 or 3")
    dw = sphere_area(n) / k
    pts = family.center + t[:, None, None] * dirs[None]
    dist = ctx.dist_to_base(pts)
    rh = rho(t)[:, None] * (1 + dist) ** 2
    m1 = float(np.sum(rh**p * (1 + dist) ** (-2 * p) * (wt * t ** (n - 1))[:, None]) * dw)
    # admissibility along every sampled ray
    adm = np.sum(rh * (1 + dist) ** -2 * wt[:, None], axis=0)
    return m1, float(adm[np.argmax(np.abs(adm - 1))])
