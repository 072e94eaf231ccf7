"""Unbounded Dirichlet problems solved on a bounded grid.

Two routes are available:

``inversion``
    ``y = (x - c)/|x - c|^2`` with ``c`` outside the closure of the domain.
    The image is bounded, the point at infinity becomes the origin, and the
    energy uses the weight ``|y|^(2(p - n))``.

``sphericalization``
    The grid stays in the original coordinates.  Gradients are multiplied
    by ``(1 + |x - a|)^2`` and the measure by ``(1 + |x - a|)^(-2p)``, so the
    cell weight is their product.  Nodes outside the sphericalized ball
    ``{d_a(x, inf) < r_inf}`` are collapsed into the point at infinity.

In both routes the node(s) standing for infinity carry the datum
``f(inf)`` only when ``p < n``; otherwise they are free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..domains.csg import DomainSpec
from ..geometry import DimensionError, SphericalizationContext
from ..measures import InversionDensity, WeightSpec, infinity_has_zero_capacity
from ..transforms import InversionMap, admissibility_check, invert_domain, sphere_area
from .grid import DIRICHLET, INTERIOR, GridProblem, ScalarField, build_problem, coupling_offsets, grid_box
from .newton import SolveReport, SolverOptions, solve_dirichlet

__all__ = [
    "GateError",
    "MissingInfinityDataError",
    "Transform",
    "UnboundedSetup",
    "UnboundedSolution",
    "check_gate",
    "prepare_unbounded",
    "solve_unbounded",
]


class GateError(ValueError):
    """The domain/exponent pair is outside the supported class."""


class MissingInfinityDataError(ValueError):
    """A value at infinity is required (p < n) but was not given."""


@dataclass(frozen=True)
class Transform:
    """``kind`` is ``inversion`` (``point`` = centre) or ``sphericalization`` (``point`` = base point)."""

    kind: str
    point: tuple
    r_inf: float = 1 / 32

    def __post_init__(self):
        if self.kind not in ("inversion", "sphericalization"):
            raise ValueError(f"unknown transform {self.kind!r}")
        object.__setattr__(self, "point", tuple(float(v) for v in self.point))

    @classmethod
    def inversion(cls, center):
        return cls("inversion", tuple(center))

    @classmethod
    def sphericalization(cls, a, r_inf: float = 1 / 32):
        return cls("sphericalization", tuple(a), r_inf)


class _SphericalFrameWeight(WeightSpec):
    """Cell weight of the sphericalized energy on original-frame cells.

    It is the p-th power of the gradient factor ``(1 + |x - a|)^2`` times the
    sphericalized density ``(1 + |x - a|)^(-2p)``.
    """

    def __init__(self, ctx: SphericalizationContext):
        self.ctx = ctx
        self.n = ctx.n

    def evaluate(self, x):
        d = self.ctx.dist_to_base(x)
        return ((1 + d) ** 2) ** self.ctx.p * (1 + d) ** (-2 * self.ctx.p)

    def to_dict(self):
        return {"kind": "sphericalized-energy", "a": self.ctx.base_point.tolist(), "p": self.ctx.p}


class AxisymmetricWeight(WeightSpec):
    """Weight on the meridian half-plane ``(rho, z)`` of an axially symmetric problem.

    ``w(rho, z) = |S^(n-2)| rho^(n-2) base(rho, 0, .., 0, z)``, so that
    meridian integrals equal integrals over R^n.
    """

    def __init__(self, base: WeightSpec, n: int):
        self.base = base
        self.full_n = n
        self.n = 2
        self.singular_point = np.zeros(2)
        self.singular_exponent = float(getattr(base, "singular_exponent", 0.0)) + (n - 2)

    def evaluate(self, z):
        z = np.asarray(z, dtype=float)
        rho = np.abs(z[..., 0])
        return sphere_area(self.full_n - 1) * rho ** (self.full_n - 2) * self.base.evaluate(_lift(z, self.full_n))

    def to_dict(self):
        return {"kind": "axisymmetric", "n": self.full_n, "base": self.base.to_dict()}


def _lift(z, n):
    z = np.asarray(z, dtype=float)
    out = np.zeros(z.shape[:-1] + (n,))
    out[..., 0] = z[..., 0]
    out[..., -1] = z[..., 1]
    return out


def _meridian(y):
    y = np.asarray(y, dtype=float)
    return np.stack([np.linalg.norm(y[..., :-1], axis=-1), y[..., -1]], axis=-1)


def check_gate(dom: DomainSpec, p: float) -> None:
    """Require an unbounded domain with ``Cp(complement) > 0`` or ``p < n``."""
    if dom.bounded:
        raise GateError("domain is bounded; use solve_dirichlet directly")
    if not (p < dom.n or dom.complement_has_positive_capacity(p)):
        raise GateError("complement has zero p-capacity and p >= n")


@dataclass
class UnboundedSetup:
    """A bounded grid problem standing for an unbounded one (data not yet set)."""

    problem: GridProblem
    domain: DomainSpec
    transform: Transform
    p: float
    to_grid: Callable
    from_grid: Callable
    inside_grid: Callable
    infinity_nodes: np.ndarray
    infinity_node_active: bool
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.domain.n

    def pulled_back(self, flat_idx) -> tuple[np.ndarray, np.ndarray]:
        """Original coordinates of grid nodes and a mask of nodes standing for infinity."""
        flat_idx = np.asarray(flat_idx)
        y = self.problem.coords(flat_idx)
        is_inf = np.isin(flat_idx, self.infinity_nodes)
        x = np.full((len(y), self.domain.n), np.nan)
        if np.any(~is_inf):
            x[~is_inf] = self.from_grid(y[~is_inf])
        return x, is_inf

    def data_vector(self, f: Callable, f_inf: float | None) -> np.ndarray:
        """Dirichlet values from data on the boundary and at infinity."""
        prob = self.problem
        data = np.zeros(prob.size)
        d = prob.dirichlet
        x, is_inf = self.pulled_back(d)
        if np.any(is_inf):
            if f_inf is None:
                raise MissingInfinityDataError("a value at infinity is required when p < n")
            data[d[is_inf]] = f_inf
        if np.any(~is_inf):
            data[d[~is_inf]] = np.asarray(f(x[~is_inf]), dtype=float).reshape(-1)
        if not np.all(np.isfinite(data)):
            raise ValueError("boundary data must be finite")
        return data


def prepare_unbounded(
    dom: DomainSpec,
    p: float,
    transform: Transform,
    h: float,
    box=None,
    symmetry_axes=(),
    radius: float | None = None,
    axisymmetric: bool = False,
) -> UnboundedSetup:
    """Build the bounded grid for an unbounded domain.

    Parameters
    ----------
    dom : DomainSpec
        Unbounded open set.
    p : float
    transform : Transform
    h : float
        Grid spacing in the computational frame.
    box : (lo, hi), optional
        Computational box; defaults to the bounding box of the image
        (inversion) or the cube of half-side ``1/r_inf`` around ``a``
        (sphericalization).
    symmetry_axes : sequence of int
        Axes ``k`` along which the problem is symmetric under ``y_k -> -y_k``
        in the computational frame; only ``y_k >= 0`` is gridded with a
        natural condition on ``y_k = 0``.  The caller is responsible for
        the symmetry of domain and data.
    axisymmetric : bool
        Inversion route only: the domain and data are invariant under
        rotations about the last coordinate axis, which passes through the
        inversion centre.  The grid then covers the meridian half-plane
        ``(rho, z)`` and the weight carries the factor
        ``|S^(n-2)| rho^(n-2)``.
    """
    n = dom.n
    check_gate(dom, p)
    if not admissibility_check(p, n):
        raise GateError(f"p = {p} does not exceed n/2 = {n / 2}")
    active = not infinity_has_zero_capacity(p, n)
    pt = np.asarray(transform.point, dtype=float)
    if pt.shape != (n,):
        raise DimensionError("transform point has the wrong dimension")
    if axisymmetric:
        if transform.kind != "inversion":
            raise ValueError("the axisymmetric reduction is available for the inversion route")
        if n < 3 or np.any(pt[:-1] != 0):
            raise ValueError("axisymmetric problems need n >= 3 and a centre on the last axis")
        return _prepare_axisymmetric(dom, p, pt, h, box, active)
    if transform.kind == "inversion":
        m = InversionMap(p, n, pt)
        img = invert_domain(m, dom)
        if box is None:
            lo, hi = img.bounding_box()
            if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
                raise ValueError("image bounding box is not finite; pass box=")
        else:
            lo, hi = (np.asarray(b, dtype=float) for b in box)
        lo = np.minimum(lo, 0.0) - 2 * h
        hi = np.maximum(hi, 0.0) + 2 * h
        for k in symmetry_axes:
            lo[k] = 0.0
        lo, shape = grid_box(lo, hi, h)
        idx = np.indices(shape).reshape(n, -1).T
        Y = lo + h * idx
        inside = img.grid_membership(Y, h).reshape(shape)
        origin = np.round(-lo / h).astype(int)
        inf_node = int(np.ravel_multi_index(tuple(origin), shape))
        inside.reshape(-1)[inf_node] = False
        prob = build_problem(
            inside, lo, h, p, 0.0, weight=InversionDensity(p, n),
            neumann_faces=[(k, 0) for k in symmetry_axes],
            infinity_node=inf_node, infinity_node_active=active,
            meta={"transform": "inversion", "center": pt.tolist()},
        )
        inf_nodes = np.array([inf_node])
        to_grid, from_grid = m.forward, m.inverse

        def inside_grid(y):
            return img.grid_membership(y, h)

    else:
        ctx = SphericalizationContext(pt, p)
        R = 1.0 / transform.r_inf - 1.0 if radius is None else radius
        if box is None:
            lo, hi = pt - R - 2 * h, pt + R + 2 * h
        else:
            lo, hi = (np.asarray(b, dtype=float) for b in box)
        for k in symmetry_axes:
            lo[k] = pt[k]
        lo, shape = grid_box(lo, hi, h, anchor=pt)
        idx = np.indices(shape).reshape(n, -1).T
        X = lo + h * idx
        dist = ctx.dist_to_base(X)
        inside = dom.grid_membership(X, h)
        far = inside & (dist >= R)
        interior = (inside & ~far).reshape(shape)
        prob = build_problem(
            interior, lo, h, p, 0.0, weight=_SphericalFrameWeight(ctx),
            neumann_faces=[(k, 0) for k in symmetry_axes],
            dirichlet=far.reshape(shape) if active else None,
            inactive=None if active else far.reshape(shape),
            meta={"transform": "sphericalization", "a": pt.tolist(), "R": R},
        )
        flat_far = np.flatnonzero(far)
        inf_nodes = flat_far[prob.kind.reshape(-1)[flat_far] == DIRICHLET]
        if not active:
            inf_nodes = np.zeros(0, dtype=np.int64)
        prob.infinity_node_active = active

        def to_grid(x):
            return np.asarray(x, dtype=float)

        from_grid = to_grid

        def inside_grid(y):
            return dom.grid_membership(y, h) & (ctx.dist_to_base(y) < R)

    return UnboundedSetup(prob, dom, transform, p, to_grid, from_grid, inside_grid, inf_nodes, active,
                          {"h": h, "symmetry_axes": list(symmetry_axes)})


def _prepare_axisymmetric(dom, p, pt, h, box, active) -> UnboundedSetup:
    n = dom.n
    m = InversionMap(p, n, pt)
    img = invert_domain(m, dom)
    if box is None:
        lo, hi = img.bounding_box()
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("image bounding box is not finite; pass box=")
    else:
        lo, hi = (np.asarray(b, dtype=float) for b in box)
    rho_max = float(np.max(np.maximum(np.abs(lo[:-1]), np.abs(hi[:-1]))))
    zlo = min(lo[-1], 0.0) - 2 * h
    zhi = max(hi[-1], 0.0) + 2 * h
    mlo, shape = grid_box([0.0, zlo], [rho_max + 2 * h, zhi], h)
    idx = np.indices(shape).reshape(2, -1).T
    Z = mlo + h * idx
    inside = img.grid_membership(_lift(Z, n), h).reshape(shape)
    origin = np.round(-mlo / h).astype(int)
    inf_node = int(np.ravel_multi_index(tuple(origin), shape))
    inside.reshape(-1)[inf_node] = False
    prob = build_problem(
        inside, mlo, h, p, 0.0, weight=AxisymmetricWeight(InversionDensity(p, n), n),
        neumann_faces=[(0, 0)], infinity_node=inf_node, infinity_node_active=active,
        meta={"transform": "inversion", "center": pt.tolist(), "axisymmetric": True},
    )

    def to_grid(x):
        return _meridian(m.forward(x))

    def from_grid(z):
        return m.inverse(_lift(z, n))

    def inside_grid(z):
        return img.grid_membership(_lift(z, n), h)

    return UnboundedSetup(prob, dom, Transform.inversion(pt), p, to_grid, from_grid, inside_grid,
                          np.array([inf_node]), active, {"h": h, "axisymmetric": True})


@dataclass
class UnboundedSolution:
    setup: UnboundedSetup
    field: ScalarField
    report: SolveReport

    def __call__(self, x) -> np.ndarray:
        """Solution at original-frame points."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.field(self.setup.to_grid(x))


def solve_unbounded(
    dom: DomainSpec,
    boundary_data: Callable | float,
    infinity_value: float | None = None,
    transform: Transform | None = None,
    h: float = 1 / 64,
    p: float = 2.0,
    box=None,
    symmetry_axes=(),
    options: SolverOptions | None = None,
    setup: UnboundedSetup | None = None,
    axisymmetric: bool = False,
) -> UnboundedSolution:
    """Solve the Dirichlet problem on an unbounded domain through a bounded grid.

    ``boundary_data`` is a callable on original-frame points (array (m, n))
    or a constant.  ``infinity_value`` is required when ``p < n`` and is
    ignored otherwise.
    """
    if setup is None:
        if transform is None:
            raise ValueError("a transform is required")
        setup = prepare_unbounded(dom, p, transform, h, box=box, symmetry_axes=symmetry_axes,
                                  axisymmetric=axisymmetric)
    f = boundary_data if callable(boundary_data) else (lambda x, c=float(boundary_data): np.full(len(x), c))
    if setup.infinity_node_active and infinity_value is None and not callable(boundary_data):
        infinity_value = float(boundary_data)
    data = setup.data_vector(f, infinity_value if setup.infinity_node_active else None)
    prob = setup.problem.with_data(data)
    field_, rep = solve_dirichlet(prob, options)
    return UnboundedSolution(setup, field_, rep)
