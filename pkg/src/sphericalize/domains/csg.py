"""Constructive descriptions of open subsets of R^n.

A :class:`DomainSpec` wraps a tree of :class:`Region` nodes.  Regions are
evaluated three ways:

* ``contains`` -- exact zero-thickness membership of the open set,
  vectorised over float arrays;
* ``contains_thick`` -- the same, but removed rays and segments are
  thickened by a given distance so that grids see them;
* ``classify_ball`` -- whether a ball lies inside, outside or across the
  set.  It uses only ``+ - *`` and comparisons, so it runs unchanged on
  ``fractions.Fraction`` inputs for exact certificates.

``minus(A, B)`` removes the *closure* of ``B``, so every tree describes an
open set.
"""

from __future__ import annotations

import math
from decimal import Decimal
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from ..geometry import DimensionError

__all__ = [
    "INSIDE",
    "OUTSIDE",
    "MIXED",
    "Region",
    "Whole",
    "HalfSpace",
    "Ball",
    "Ray",
    "Segment",
    "Union",
    "Intersect",
    "Minus",
    "Pullback",
    "DomainSpec",
    "DomainParseError",
    "parse_domain",
    "load_domain",
    "box",
]

INSIDE, OUTSIDE, MIXED = "inside", "outside", "mixed"


def _exact(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    return Fraction(Decimal(repr(float(v)))) if not isinstance(v, str) else Fraction(Decimal(v))


def _fmt(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    d = Decimal(v.numerator) / Decimal(v.denominator)
    if Fraction(d) == v:
        return format(d, "f")
    return repr(float(v))


def _dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def _sub(a, b):
    return tuple(x - y for x, y in zip(a, b))


class Region:
    n: int

    def contains(self, x: np.ndarray) -> np.ndarray:
        return self.contains_thick(x, 0.0)

    def contains_thick(self, x: np.ndarray, thickness: float) -> np.ndarray:
        raise NotImplementedError

    def closure_contains(self, x: np.ndarray, thickness: float = 0.0) -> np.ndarray:
        raise NotImplementedError

    def classify_ball(self, center: Sequence, radius) -> str:
        raise NotImplementedError

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def thin_sets(self) -> list:
        return []

    def min_feature_size(self) -> float:
        return math.inf

    def to_lines(self, indent: int = 0) -> list[str]:
        raise NotImplementedError


class Whole(Region):
    """All of R^n."""

    def __init__(self, n: int):
        self.n = int(n)

    def contains_thick(self, x, thickness):
        x = np.asarray(x, dtype=float)
        return np.ones(x.shape[:-1], dtype=bool)

    def closure_contains(self, x, thickness=0.0):
        return self.contains(x)

    def classify_ball(self, center, radius):
        return INSIDE

    def bounding_box(self):
        return np.full(self.n, -np.inf), np.full(self.n, np.inf)

    def to_lines(self, indent=0):
        return [" " * indent + f"whole {self.n}"]

    def __repr__(self):
        return f"Whole({self.n})"


class HalfSpace(Region):
    """Open half-space ``{x : normal . x > offset}``."""

    def __init__(self, normal, offset):
        self.normal_exact = tuple(_exact(v) for v in normal)
        self.offset_exact = _exact(offset)
        self.normal = np.array([float(v) for v in self.normal_exact])
        self.offset = float(self.offset_exact)
        self.n = len(self.normal)
        if not np.any(self.normal):
            raise ValueError("half-space normal must be nonzero")

    def _signed(self, x):
        return np.asarray(x, dtype=float) @ self.normal - self.offset

    def contains_thick(self, x, thickness):
        return self._signed(x) > 0

    def closure_contains(self, x, thickness=0.0):
        return self._signed(x) >= 0

    def classify_ball(self, center, radius):
        exact = isinstance(radius, Fraction)
        nrm = self.normal_exact if exact else tuple(self.normal)
        off = self.offset_exact if exact else self.offset
        s = _dot(nrm, center) - off
        nn = _dot(nrm, nrm)
        if s <= 0 and s * s >= radius * radius * nn:
            return OUTSIDE
        if s >= 0 and s * s >= radius * radius * nn:
            return INSIDE
        return MIXED

    def bounding_box(self):
        lo = np.full(self.n, -np.inf)
        hi = np.full(self.n, np.inf)
        nz = np.flatnonzero(self.normal)
        if len(nz) == 1:
            k = nz[0]
            bound = self.offset / self.normal[k]
            if self.normal[k] > 0:
                lo[k] = bound
            else:
                hi[k] = bound
        return lo, hi

    def to_lines(self, indent=0):
        return [" " * indent + "halfspace " + " ".join(_fmt(v) for v in self.normal_exact + (self.offset_exact,))]

    def __repr__(self):
        return f"HalfSpace({self.normal.tolist()}, {self.offset})"


class Ball(Region):
    """Open ball ``{x : |x - center| < radius}``."""

    def __init__(self, center, radius):
        self.center_exact = tuple(_exact(v) for v in center)
        self.radius_exact = _exact(radius)
        self.center = np.array([float(v) for v in self.center_exact])
        self.radius = float(self.radius_exact)
        self.n = len(self.center)
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")

    def _dist(self, x):
        return np.linalg.norm(np.asarray(x, dtype=float) - self.center, axis=-1)

    def contains_thick(self, x, thickness):
        return self._dist(x) < self.radius

    def closure_contains(self, x, thickness=0.0):
        return self._dist(x) <= self.radius

    def classify_ball(self, center, radius):
        exact = isinstance(radius, Fraction)
        c = self.center_exact if exact else tuple(self.center)
        R = self.radius_exact if exact else self.radius
        d = _sub(center, c)
        dd = _dot(d, d)
        if dd >= (R + radius) ** 2:
            return OUTSIDE
        if R >= radius and dd <= (R - radius) ** 2:
            return INSIDE
        return MIXED

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    def min_feature_size(self):
        return 2 * self.radius

    def to_lines(self, indent=0):
        return [" " * indent + "ball " + " ".join(_fmt(v) for v in self.center_exact + (self.radius_exact,))]

    def __repr__(self):
        return f"Ball({self.center.tolist()}, {self.radius})"


class _Thin(Region):
    """Closed set ``{base + t * direction : t in [t0, t1]}`` with empty interior."""

    def __init__(self, base, direction, t0, t1=None):
        self.base_exact = tuple(_exact(v) for v in base)
        self.dir_exact = tuple(_exact(v) for v in direction)
        self.t0_exact = _exact(t0)
        self.t1_exact = None if t1 is None else _exact(t1)
        self.base = np.array([float(v) for v in self.base_exact])
        self.direction = np.array([float(v) for v in self.dir_exact])
        self.t0 = float(self.t0_exact)
        self.t1 = math.inf if t1 is None else float(self.t1_exact)
        self.n = len(self.base)
        if not np.any(self.direction) and self.t1 != self.t0:
            raise ValueError("direction must be nonzero")
        if self.t1 < self.t0:
            raise ValueError("t1 must not be smaller than t0")

    def _distance2(self, x):
        w = np.asarray(x, dtype=float) - self.base
        dd = self.direction @ self.direction
        if dd == 0:
            return np.einsum("...i,...i->...", w, w)
        t = np.clip((w @ self.direction) / dd, self.t0, self.t1)
        w -= t[..., None] * self.direction
        return np.einsum("...i,...i->...", w, w)

    def distance(self, x):
        return np.sqrt(self._distance2(x))

    def contains_thick(self, x, thickness):
        if thickness <= 0:
            x = np.asarray(x, dtype=float)
            return np.zeros(x.shape[:-1], dtype=bool)
        return self._distance2(x) <= thickness * thickness

    def closure_contains(self, x, thickness=0.0):
        return self._distance2(x) <= thickness * thickness

    def _exact_dist2(self, center):
        b, d = self.base_exact, self.dir_exact
        w = _sub(center, b)
        dd = _dot(d, d)
        if dd == 0:
            t = self.t0_exact
        else:
            t = _dot(w, d) / dd
            t = max(t, self.t0_exact)
            if self.t1_exact is not None:
                t = min(t, self.t1_exact)
        foot = tuple(bi + t * di for bi, di in zip(b, d))
        r = _sub(center, foot)
        return _dot(r, r)

    def classify_ball(self, center, radius):
        if isinstance(radius, Fraction):
            d2 = self._exact_dist2(tuple(_exact(c) for c in center))
            return OUTSIDE if d2 >= radius * radius else MIXED
        d = float(self.distance(np.array([float(c) for c in center])))
        return OUTSIDE if d >= radius else MIXED

    def bounding_box(self):
        p0 = self.base + self.t0 * self.direction
        if math.isinf(self.t1):
            lo = np.where(self.direction < 0, -np.inf, p0)
            hi = np.where(self.direction > 0, np.inf, p0)
            return lo, hi
        p1 = self.base + self.t1 * self.direction
        return np.minimum(p0, p1), np.maximum(p0, p1)

    def thin_sets(self):
        return [self]

    @property
    def dimension(self) -> int:
        return 0 if self.t1 == self.t0 or not np.any(self.direction) else 1


class Ray(_Thin):
    def __init__(self, base, direction, t0=0):
        super().__init__(base, direction, t0, None)

    def to_lines(self, indent=0):
        vals = self.base_exact + self.dir_exact + (self.t0_exact,)
        return [" " * indent + "ray " + " ".join(_fmt(v) for v in vals)]

    def __repr__(self):
        return f"Ray({self.base.tolist()}, {self.direction.tolist()}, {self.t0})"


class Segment(_Thin):
    def __init__(self, base, direction, t0, t1):
        super().__init__(base, direction, t0, t1)

    def to_lines(self, indent=0):
        vals = self.base_exact + self.dir_exact + (self.t0_exact, self.t1_exact)
        return [" " * indent + "segment " + " ".join(_fmt(v) for v in vals)]

    def __repr__(self):
        return f"Segment({self.base.tolist()}, {self.direction.tolist()}, {self.t0}, {self.t1})"


class _Composite(Region):
    keyword = ""

    def __init__(self, *children: Region):
        if not children:
            raise ValueError(f"{self.keyword} needs at least one operand")
        ns = {c.n for c in children}
        if len(ns) != 1:
            raise DimensionError("operands of different dimensions")
        self.children = list(children)
        self.n = ns.pop()

    def thin_sets(self):
        return [t for c in self.children for t in c.thin_sets()]

    def min_feature_size(self):
        return min(c.min_feature_size() for c in self.children)

    def to_lines(self, indent=0):
        out = [" " * indent + self.keyword]
        for c in self.children:
            out += c.to_lines(indent + 2)
        out.append(" " * indent + "end")
        return out

    def __repr__(self):
        return f"{type(self).__name__}({', '.join(map(repr, self.children))})"


class Union(_Composite):
    keyword = "union"

    def contains_thick(self, x, thickness):
        out = self.children[0].contains_thick(x, thickness)
        for c in self.children[1:]:
            out = out | c.contains_thick(x, thickness)
        return out

    def closure_contains(self, x, thickness=0.0):
        out = self.children[0].closure_contains(x, thickness)
        for c in self.children[1:]:
            out = out | c.closure_contains(x, thickness)
        return out

    def classify_ball(self, center, radius):
        res = [c.classify_ball(center, radius) for c in self.children]
        if INSIDE in res:
            return INSIDE
        if all(r == OUTSIDE for r in res):
            return OUTSIDE
        return MIXED

    def bounding_box(self):
        boxes = [c.bounding_box() for c in self.children]
        return np.min([b[0] for b in boxes], axis=0), np.max([b[1] for b in boxes], axis=0)


class Intersect(_Composite):
    keyword = "intersect"

    def contains_thick(self, x, thickness):
        out = self.children[0].contains_thick(x, thickness)
        for c in self.children[1:]:
            out = out & c.contains_thick(x, thickness)
        return out

    def closure_contains(self, x, thickness=0.0):
        out = self.children[0].closure_contains(x, thickness)
        for c in self.children[1:]:
            out = out & c.closure_contains(x, thickness)
        return out

    def classify_ball(self, center, radius):
        res = [c.classify_ball(center, radius) for c in self.children]
        if OUTSIDE in res:
            return OUTSIDE
        if all(r == INSIDE for r in res):
            return INSIDE
        return MIXED

    def bounding_box(self):
        boxes = [c.bounding_box() for c in self.children]
        return np.max([b[0] for b in boxes], axis=0), np.min([b[1] for b in boxes], axis=0)


class Minus(_Composite):
    """First operand minus the closure of the union of the others."""

    keyword = "minus"

    def __init__(self, *children):
        if len(children) < 2:
            raise ValueError("minus needs at least two operands")
        super().__init__(*children)

    def contains_thick(self, x, thickness):
        out = self.children[0].contains_thick(x, thickness)
        for c in self.children[1:]:
            out = out & ~c.closure_contains(x, thickness)
        return out

    def closure_contains(self, x, thickness=0.0):
        out = self.children[0].closure_contains(x, thickness)
        for c in self.children[1:]:
            out = out & ~c.contains_thick(x, thickness)
        return out

    def classify_ball(self, center, radius):
        a = self.children[0].classify_ball(center, radius)
        rest = [c.classify_ball(center, radius) for c in self.children[1:]]
        if a == OUTSIDE or INSIDE in rest:
            return OUTSIDE
        if a == INSIDE and all(r == OUTSIDE for r in rest):
            return INSIDE
        return MIXED

    def bounding_box(self):
        return self.children[0].bounding_box()


class Pullback(Region):
    """Image of a region under an involutive point map (membership by pullback).

    ``inverse`` maps image points back; ``scale`` gives the local length
    scale factor image/original at an image point, used to translate
    thicknesses.  Exact ball classification is not available.
    """

    def __init__(self, region: Region, inverse, scale, label: str = "mapped"):
        self.region = region
        self.inverse = inverse
        self.scale = scale
        self.n = region.n
        self.label = label

    def contains_thick(self, x, thickness):
        x = np.asarray(x, dtype=float)
        xo = self.inverse(x)
        th = thickness / np.maximum(self.scale(x), 1e-300) if thickness else 0.0
        return self.region.contains_thick(xo, th) if np.isscalar(th) else _thick_vec(self.region, xo, th)

    def closure_contains(self, x, thickness=0.0):
        x = np.asarray(x, dtype=float)
        xo = self.inverse(x)
        th = thickness / np.maximum(self.scale(x), 1e-300) if thickness else 0.0
        if np.isscalar(th):
            return self.region.closure_contains(xo, th)
        return _closure_vec(self.region, xo, th)

    def classify_ball(self, center, radius):
        raise NotImplementedError("exact classification is not available for mapped regions")

    def bounding_box(self):
        return np.full(self.n, -np.inf), np.full(self.n, np.inf)

    def thin_sets(self):
        return self.region.thin_sets()

    def to_lines(self, indent=0):
        raise NotImplementedError("mapped regions have no text form")

    def __repr__(self):
        return f"Pullback({self.label}, {self.region!r})"


def _thick_vec(region, x, th):
    # per-point thickness: evaluate at the max and refine the thin parts
    flat = x.reshape(-1, x.shape[-1])
    thf = np.broadcast_to(th, x.shape[:-1]).reshape(-1)
    base = region.contains_thick(flat, 0.0)
    for t in region.thin_sets():
        base &= ~(t.distance(flat) <= thf)
    return base.reshape(x.shape[:-1])


def _closure_vec(region, x, th):
    flat = x.reshape(-1, x.shape[-1])
    out = region.closure_contains(flat, 0.0)
    return out.reshape(x.shape[:-1])


def box(lo: Sequence, hi: Sequence) -> Region:
    """Open axis-aligned box as an intersection of half-spaces."""
    n = len(lo)
    parts = []
    for k in range(n):
        e = [0] * n
        e[k] = 1
        parts.append(HalfSpace(e, lo[k]))
        e = [0] * n
        e[k] = -1
        parts.append(HalfSpace(e, -_exact(hi[k])))
    return Intersect(*parts)


class DomainSpec:
    """An open set ``Omega`` in R^n given by a region tree.

    Parameters
    ----------
    region : Region
        The tree.
    name : str, optional
        Label used in reports.
    feature_size : float, optional
        Smallest geometric feature the grid analyses must resolve (gaps
        between removed rays, widths of thin boxes).  Defaults to the
        smallest ball diameter in the tree.
    """

    probe_radius = 1e6

    def __init__(self, region: Region, name: str = "domain", feature_size: float | None = None):
        self.region = region
        self.n = region.n
        self.name = name
        self.feature_size = region.min_feature_size() if feature_size is None else float(feature_size)
        self.bounded = self._probe_bounded()

    @property
    def contains_infinity_in_boundary(self) -> bool:
        return not self.bounded

    def _probe_bounded(self) -> bool:
        lo, hi = self.region.bounding_box()
        if np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)):
            return True
        n = self.n
        rng = np.random.default_rng(12345)
        d = rng.standard_normal((4096, n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        axes = np.vstack([np.eye(n), -np.eye(n)])
        diag = np.array(np.meshgrid(*[[-1.0, 1.0]] * n)).reshape(n, -1).T / math.sqrt(n)
        d = np.vstack([axes, diag, d])
        for R in (self.probe_radius / 4, self.probe_radius / 2, self.probe_radius):
            if np.any(self.region.contains(R * d)):
                return False
        return True

    def membership(self, x) -> np.ndarray:
        return self.region.contains(np.asarray(x, dtype=float))

    __call__ = membership

    def grid_membership(self, x, h: float) -> np.ndarray:
        """Membership with removed rays/segments thickened to one grid cell."""
        return self.region.contains_thick(np.asarray(x, dtype=float), 0.5 * h * (1 + 1e-9))

    def ball_disjoint(self, center, radius, exact: bool = False) -> bool:
        """Whether the open ball misses the domain (exactly, with Fractions, if asked)."""
        if exact:
            c = tuple(_exact(v) for v in center)
            return self.region.classify_ball(c, _exact(radius)) == OUTSIDE
        return self.region.classify_ball(tuple(float(v) for v in center), float(radius)) == OUTSIDE

    def bounding_box(self):
        return self.region.bounding_box()

    def complement_has_positive_capacity(self, p: float, search_radius: float = 16.0) -> bool:
        """Desk-scale decision whether ``Cp(R^n \\ Omega) > 0``.

        A complement containing a ball has positive capacity.  Otherwise the
        complement is made of removed rays/segments/points, and a set of
        Hausdorff dimension ``k`` has positive p-capacity iff ``p > n - k``.
        """
        n = self.n
        lo, hi = self.region.bounding_box()
        axes = []
        for k in range(n):
            a = lo[k] if np.isfinite(lo[k]) else -search_radius
            b = hi[k] if np.isfinite(hi[k]) else search_radius
            a, b = a - 2.0, b + 2.0
            axes.append(np.linspace(a, b, 33))
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        outside = ~self.region.closure_contains(pts)
        for x in pts[outside]:
            for rho in (0.5, 0.1, 0.01):
                try:
                    if self.ball_disjoint(x, rho):
                        return True
                except NotImplementedError:
                    return True
        dims = [t.dimension for t in self.region.thin_sets()]
        if not dims:
            return False
        return p > n - max(dims)

    def to_text(self) -> str:
        return "\n".join(self.region.to_lines()) + "\n"

    def __repr__(self):
        return f"DomainSpec({self.name!r}, n={self.n}, bounded={self.bounded})"


class DomainParseError(ValueError):
    pass


_PRIMS = {"halfspace", "ball", "ray", "segment", "whole"}
_BLOCKS = {"union": Union, "intersect": Intersect, "minus": Minus}


def _num(tok: str, lineno: int) -> Fraction:
    try:
        return Fraction(Decimal(tok))
    except Exception:
        raise DomainParseError(f"line {lineno}: not a number: {tok!r}") from None


def _primitive(words: list[str], lineno: int, n_hint: int | None) -> Region:
    kw, vals = words[0], [_num(t, lineno) for t in words[1:]]
    if kw == "whole":
        if len(vals) != 1:
            raise DomainParseError(f"line {lineno}: whole takes the dimension")
        return Whole(int(vals[0]))
    if kw == "halfspace":
        if len(vals) < 3:
            raise DomainParseError(f"line {lineno}: halfspace needs n normal components and an offset")
        return HalfSpace(vals[:-1], vals[-1])
    if kw == "ball":
        if len(vals) < 3:
            raise DomainParseError(f"line {lineno}: ball needs n centre components and a radius")
        return Ball(vals[:-1], vals[-1])
    if kw == "ray":
        if len(vals) < 5 or (len(vals) - 1) % 2:
            raise DomainParseError(f"line {lineno}: ray needs base, direction and t0")
        m = (len(vals) - 1) // 2
        return Ray(vals[:m], vals[m : 2 * m], vals[-1])
    if kw == "segment":
        if len(vals) < 6 or (len(vals) - 2) % 2:
            raise DomainParseError(f"line {lineno}: segment needs base, direction, t0 and t1")
        m = (len(vals) - 2) // 2
        return Segment(vals[:m], vals[m : 2 * m], vals[-2], vals[-1])
    raise DomainParseError(f"line {lineno}: unknown primitive {kw!r}")


def parse_domain(text: str, name: str = "domain", feature_size: float | None = None) -> DomainSpec:
    """Parse the plain-text CSG format.

    One primitive per line (``halfspace nx ny .. offset``, ``ball cx cy .. r``,
    ``ray bx by .. dx dy .. t0``, ``segment bx .. dx .. t0 t1``, ``whole n``);
    ``union`` / ``intersect`` / ``minus`` open a block closed by ``end``.
    Several top-level items are combined by union.  ``#`` starts a comment.
    Numbers are read as exact decimals.
    """
    stack: list[tuple[str, list]] = [("union", [])]
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        kw = words[0].lower()
        if kw in _BLOCKS:
            if len(words) != 1:
                raise DomainParseError(f"line {lineno}: {kw} takes no arguments")
            stack.append((kw, []))
        elif kw == "end":
            if len(stack) == 1:
                raise DomainParseError(f"line {lineno}: unmatched end")
            kind, items = stack.pop()
            try:
                stack[-1][1].append(_BLOCKS[kind](*items))
            except (ValueError, DimensionError) as exc:
                raise DomainParseError(f"line {lineno}: {exc}") from None
        elif kw in _PRIMS:
            try:
                stack[-1][1].append(_primitive([kw] + words[1:], lineno, None))
            except ValueError as exc:
                if isinstance(exc, DomainParseError):
                    raise
                raise DomainParseError(f"line {lineno}: {exc}") from None
        else:
            raise DomainParseError(f"line {lineno}: unknown keyword {kw!r}")
    if len(stack) != 1:
        raise DomainParseError("unterminated block (missing 'end')")
    items = stack[0][1]
    if not items:
        raise DomainParseError("empty domain")
    region = items[0] if len(items) == 1 else Union(*items)
    return DomainSpec(region, name=name, feature_size=feature_size)


def load_domain(path, feature_size: float | None = None) -> DomainSpec:
    from pathlib import Path

    path = Path(path)
    return parse_domain(path.read_text(), name=path.stem, feature_size=feature_size)
