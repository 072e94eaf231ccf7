"""Points of the one-point compactification and the sphericalized metric.

The ambient space is R^n with the Euclidean metric.  A point is either a
finite coordinate vector or the singleton :data:`INFINITY`.  The module
provides the three-case distance ``d_a``, the certified enclosure of the
chain metric built from it, a shortest-path upper estimate of that chain
metric, and the arc-length density that converts Euclidean curve length
into sphericalized length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.sparse.csgraph import dijkstra

__all__ = [
    "INFINITY",
    "Infinity",
    "DimensionError",
    "SphericalizationContext",
    "as_point",
    "is_infinity",
    "d_a",
    "dhat_bounds",
    "dhat_chain_upper",
    "arc_length_density",
    "poincare_exponent",
]


class DimensionError(ValueError):
    """Raised when points of different dimensions are mixed."""


class Infinity:
    """The point at infinity.  Use the module-level :data:`INFINITY`."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITY"

    def __reduce__(self):
        return (Infinity, ())


INFINITY = Infinity()

Point = Union[Infinity, np.ndarray, Sequence[float]]


def is_infinity(x) -> bool:
    return x is INFINITY


def as_point(x, n: int | None = None):
    """Validate ``x`` and return either INFINITY or a float array."""
    if x is INFINITY:
        return x
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise DimensionError(f"a point must be a 1-d coordinate vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point coordinates must be finite")
    if n is not None and arr.shape[0] != n:
        raise DimensionError(f"expected a point in R^{n}, got R^{arr.shape[0]}")
    return arr


def poincare_exponent(p: float, Q: float) -> float:
    """Exponent of the Poincare inequality assumed on X (metadata only)."""
    if p <= Q:
        return p
    return p * Q / (2 * p - Q)


def _check_standing_assumption(p: float, Q: float) -> None:
    if p <= 1:
        raise ValueError(f"p must exceed 1, got {p}")
    if Q >= 2:
        if not p > Q / 2:
            raise ValueError(f"need p > Q/2 = {Q / 2}, got p = {p}")
    elif Q > 1:
        if not p < Q / (2 - Q):
            raise ValueError(f"need 1 < p < Q/(2-Q) = {Q / (2 - Q)}, got p = {p}")
    else:
        raise ValueError(f"Q must exceed 1, got {Q}")


@dataclass(frozen=True)
class SphericalizationContext:
    """Base point, exponent and dimension of a sphericalization.

    Parameters
    ----------
    base_point : array_like
        The base point ``a`` in R^n.
    p : float
        Energy exponent; must satisfy ``p > n/2``.
    """

    base_point: np.ndarray
    p: float
    n: int = field(init=False)

    def __post_init__(self):
        a = as_point(self.base_point)
        if a is INFINITY:
            raise ValueError("the base point must be finite")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "base_point", a)
        object.__setattr__(self, "n", int(a.shape[0]))
        if self.n < 2:
            raise DimensionError("dimension must be at least 2")
        _check_standing_assumption(float(self.p), float(self.n))

    @property
    def Q(self) -> int:
        return self.n

    @property
    def q(self) -> float:
        return poincare_exponent(self.p, self.n)

    def dist_to_base(self, x) -> np.ndarray:
        """Euclidean distance to the base point; ``x`` may be (..., n)."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise DimensionError(f"expected points in R^{self.n}, got last axis {x.shape[-1]}")
        return np.linalg.norm(x - self.base_point, axis=-1)

    def __hash__(self):
        return hash((tuple(self.base_point), self.p))

    def __eq__(self, other):
        if not isinstance(other, SphericalizationContext):
            return NotImplemented
        return self.p == other.p and np.array_equal(self.base_point, other.base_point)


def d_a(ctx: SphericalizationContext, x, y) -> float:
    """The (non-metric) sphericalized distance between two points."""
    x = as_point(x, ctx.n)
    y = as_point(y, ctx.n)
    if x is INFINITY and y is INFINITY:
        return 0.0
    if x is INFINITY:
        x, y = y, x
    dx = float(np.linalg.norm(x - ctx.base_point))
    if y is INFINITY:
        return 1.0 / (1.0 + dx)
    dy = float(np.linalg.norm(y - ctx.base_point))
    return float(np.linalg.norm(x - y)) / ((1.0 + dx) * (1.0 + dy))


def _d_a_matrix(ctx: SphericalizationContext, pts: list) -> np.ndarray:
    """Pairwise d_a over a list that may contain INFINITY."""
    m = len(pts)
    finite = np.array([p is not INFINITY for p in pts])
    coords = np.zeros((m, ctx.n))
    for i, p in enumerate(pts):
        if p is not INFINITY:
            coords[i] = p
    da = 1.0 + np.linalg.norm(coords - ctx.base_point, axis=1)
    diff = np.linalg.norm(coords[:, None, :] - coords[None, :, :], axis=-1)
    D = diff / np.outer(da, da)
    inv = 1.0 / da
    D[~finite, :] = inv[None, :]
    D[:, ~finite] = inv[:, None]
    D[np.ix_(~finite, ~finite)] = 0.0
    np.fill_diagonal(D, 0.0)
    return D


def dhat_bounds(ctx: SphericalizationContext, x, y) -> tuple[float, float]:
    """Certified enclosure ``[d_a/4, d_a]`` of the chain metric."""
    d = d_a(ctx, x, y)
    return (d / 4.0, d)


def dhat_chain_upper(ctx: SphericalizationContext, x, y, sample_points=()) -> float:
    """Upper estimate of the chain metric through the given sample points.

    Runs Dijkstra on the complete graph over ``{x, y} + sample_points``
    with edge weights ``d_a``.  The value never exceeds ``d_a(x, y)`` and
    never increases when points are added.
    """
    x = as_point(x, ctx.n)
    y = as_point(y, ctx.n)
    pts = [x, y] + [as_point(s, ctx.n) for s in sample_points]
    if x is INFINITY and y is INFINITY:
        return 0.0
    if x is not INFINITY and y is not INFINITY and np.array_equal(x, y):
        return 0.0
    D = _d_a_matrix(ctx, pts)
    # zero-weight edges between distinct entries would be dropped by csgraph
    D = np.where((D == 0.0) & ~np.eye(len(pts), dtype=bool), 1e-300, D)
    dist = dijkstra(D, directed=False, indices=0)
    return float(min(dist[1], d_a(ctx, x, y)))


def arc_length_density(ctx: SphericalizationContext, x) -> np.ndarray | float:
    """Density of sphericalized arc length w.r.t. Euclidean arc length.

    Accepts a single point or an array of shape (..., n).
    """
    if x is INFINITY:
        raise ValueError("arc-length density is undefined at infinity")
    arr = np.asarray(x, dtype=float)
    r = ctx.dist_to_base(arr)
    out = 1.0 / (1.0 + r) ** 2
    return float(out) if np.ndim(out) == 0 else out


def polyline_length_sphericalized(ctx: SphericalizationContext, vertices) -> float:
    """Midpoint-rule sphericalized length of a polyline."""
    v = np.asarray(vertices, dtype=float)
    seg = np.linalg.norm(np.diff(v, axis=0), axis=1)
    mid = 0.5 * (v[1:] + v[:-1])
    return float(np.sum(seg * arc_length_density(ctx, mid)))


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)
