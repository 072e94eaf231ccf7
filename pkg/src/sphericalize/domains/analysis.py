"""Grid analyses of a domain near infinity and near boundary points.

Connectivity questions are answered by flood fill on a node grid in which
removed rays and segments are thickened to one cell, with face
connectivity.  Any lattice edge crossing a thickened line has an endpoint
within half a cell of it, so thin cuts are never leaked through.
Unboundedness is a scale-limited proxy: a component is unbounded when it
reaches the truncation sphere ``|x - a| = r_max``.

Porosity witnesses are checked against the region tree with exact rational
arithmetic, independently of any grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from ..geometry import SphericalizationContext, d_a
from .csg import Ball, DomainSpec, Region, Whole

__all__ = [
    "R_MAX",
    "ResolutionError",
    "Component",
    "components_outside_ball",
    "DirectionAtInfinity",
    "directions_at_infinity",
    "ConnectivityReport",
    "connectivity_at_point",
    "connectivity_at_infinity",
    "finitely_connected_at_boundary",
    "PorosityReport",
    "porosity_at_infinity",
    "RegularityVerdict",
    "regularity_at_infinity_verdict",
    "mazurkiewicz_distance",
    "slit_mazurkiewicz_oracle",
    "ParabolicityReport",
    "p_parabolicity_estimate",
]

R_MAX = 1024.0
_CHUNK = 1 << 20


class ResolutionError(ValueError):
    """The grid is too coarse for the domain's declared feature size."""


def _check_resolution(dom: DomainSpec, h: float):
    if dom.feature_size < 2 * h:
        raise ResolutionError(f"h={h:g} does not resolve feature size {dom.feature_size:g} by 2 cells")


def _structure(n):
    return ndimage.generate_binary_structure(n, 1)


def _grid(lo, hi, h):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    i0 = np.floor(lo / h)
    i1 = np.ceil(hi / h)
    shape = tuple(int(v) for v in i1 - i0 + 1)
    return i0 * h, shape


def _eval_mask(shape, lo, h, fn: Callable) -> np.ndarray:
    """Evaluate a pointwise predicate over all nodes in chunks."""
    n = len(shape)
    total = int(np.prod(shape))
    out = np.empty(total, dtype=bool)
    for s in range(0, total, _CHUNK):
        idx = np.stack(np.unravel_index(np.arange(s, min(s + _CHUNK, total)), shape), axis=1)
        out[s : s + len(idx)] = fn(lo + h * idx)
    return out.reshape(shape)


@dataclass
class Component:
    id: int
    bounded: bool
    representative: np.ndarray
    size: int
    extent: float
    label: int = field(default=0, repr=False)

    def to_dict(self):
        return {"id": self.id, "bounded": self.bounded, "representative": self.representative.tolist(),
                "size": self.size, "extent": self.extent}


@dataclass
class _Labelled:
    labels: np.ndarray
    lo: np.ndarray
    h: float
    components: list

    def component_of(self, x) -> int:
        j = tuple(np.round((np.asarray(x, dtype=float) - self.lo) / self.h).astype(int))
        if any(v < 0 or v >= s for v, s in zip(j, self.labels.shape)):
            return -1
        lab = int(self.labels[j])
        for c in self.components:
            if c.label == lab:
                return c.id
        return -1


def _label_outside_ball(dom: DomainSpec, a, k: float, h: float, r_max: float):
    n = dom.n
    a = np.asarray(a, dtype=float)
    blo, bhi = dom.bounding_box()
    lo = np.maximum(blo - 2 * h, a - r_max)
    hi = np.minimum(bhi + 2 * h, a + r_max)
    glo, shape = _grid(lo, hi, h)

    def fn(x):
        r = np.linalg.norm(x - a, axis=1)
        return (r > k) & (r < r_max) & dom.grid_membership(x, h)

    mask = _eval_mask(shape, glo, h, fn)
    labels, nlab = ndimage.label(mask, structure=_structure(n))
    comps = []
    if nlab:
        idx = np.arange(1, nlab + 1)
        # first node in raster order is the lexicographic seed
        flat = labels.reshape(-1)
        order = np.flatnonzero(flat)
        first = np.full(nlab + 1, -1, dtype=np.int64)
        labs = flat[order]
        uniq, pos = np.unique(labs, return_index=True)
        first[uniq] = order[pos]
        sizes = ndimage.sum_labels(np.ones_like(mask, dtype=np.int64), labels, idx)
        # farthest node of each component from a
        far = np.zeros(nlab + 1)
        total = labels.size
        for s in range(0, total, _CHUNK):
            sl = np.arange(s, min(s + _CHUNK, total))
            lab = flat[sl]
            keep = lab > 0
            if not np.any(keep):
                continue
            pts = glo + h * np.stack(np.unravel_index(sl[keep], shape), axis=1)
            np.maximum.at(far, lab[keep], np.linalg.norm(pts - a, axis=1))
        for cid, lab in enumerate(idx):
            rep = glo + h * np.array(np.unravel_index(first[lab], shape), dtype=float)
            unbounded = far[lab] >= r_max - 2 * h * math.sqrt(n)
            comps.append(Component(cid, not unbounded, rep, int(sizes[cid]), float(far[lab]), int(lab)))
    return _Labelled(labels, glo, h, comps)


def _default_h(dom: DomainSpec, k: float) -> float:
    return min(dom.feature_size / 4, k / 4, 1.0)


def components_outside_ball(dom: DomainSpec, a, k: float, h: float | None = None,
                            r_max: float = R_MAX) -> list[Component]:
    """Components of ``Omega \\ closure(B(a, k))`` inside ``B(a, r_max)``.

    Parameters
    ----------
    dom : DomainSpec
    a : array_like
        Base point.
    k : float
        Radius of the removed ball.
    h : float, optional
        Grid spacing; defaults to a quarter of the feature size, capped
        by ``k/4`` and 1.
    r_max : float
        Truncation radius.  Components reaching it are reported unbounded.

    Returns
    -------
    list of Component
        Ordered by their first node in raster order.

    Raises
    ------
    ResolutionError
        If ``h`` is coarser than half the declared feature size.
    """
    h = _default_h(dom, k) if h is None else float(h)
    _check_resolution(dom, h)
    return _label_outside_ball(dom, a, k, h, r_max).components


@dataclass
class DirectionAtInfinity:
    """A chain of nested unbounded components, one per level ``k``."""

    levels: list
    component_ids: list
    representatives: list
    #: node of the deepest component closest to the base point
    anchor: np.ndarray | None = None

    @property
    def depth(self) -> int:
        return len(self.levels)


def directions_at_infinity(dom: DomainSpec, a, levels: Sequence[float], h: float | None = None,
                           r_max: float = R_MAX) -> list[DirectionAtInfinity]:
    """All chains ``Omega_1 > Omega_2 > ...`` of unbounded components at the given radii.

    Nesting is verified on the grid: every node of a component at a deeper
    level must lie in its parent component.
    """
    levels = sorted(float(k) for k in levels)
    h = min(_default_h(dom, k) for k in levels) if h is None else float(h)
    _check_resolution(dom, h)
    labelled = [_label_outside_ball(dom, a, k, h, r_max) for k in levels]
    chains = [DirectionAtInfinity([levels[0]], [c.id], [c.representative])
              for c in labelled[0].components if not c.bounded]
    for li in range(1, len(levels)):
        prev, cur = labelled[li - 1], labelled[li]
        if prev.labels.shape != cur.labels.shape:
            raise ResolutionError("levels must share one grid")
        nxt = []
        for c in cur.components:
            if c.bounded:
                continue
            parent_labels = np.unique(prev.labels[cur.labels == c.label])
            if len(parent_labels) != 1 or parent_labels[0] == 0:
                raise ResolutionError("component nesting failed on the grid")
            pid = next(pc.id for pc in prev.components if pc.label == parent_labels[0])
            for ch in chains:
                if ch.component_ids[-1] == pid and len(ch.levels) == li:
                    nxt.append(DirectionAtInfinity(ch.levels + [levels[li]], ch.component_ids + [c.id],
                                                   ch.representatives + [c.representative]))
        chains = nxt
    last = labelled[-1]
    for ch in chains:
        lab = next(c.label for c in last.components if c.id == ch.component_ids[-1])
        nodes = last.lo + h * np.argwhere(last.labels == lab)
        ch.anchor = nodes[np.argmin(np.linalg.norm(nodes - a, axis=1))]
    return chains


@dataclass
class ConnectivityReport:
    """``N(r, x)`` and ``H(r, x)`` at a boundary point or at infinity."""

    point: object
    r: float
    N: int
    H: list
    H_clear: bool
    H_bounded: bool | None = None

    @property
    def ok(self) -> bool:
        return bool(self.H_bounded) if self.point == "infinity" else self.H_clear

    def to_dict(self):
        return {"point": self.point if isinstance(self.point, str) else list(map(float, self.point)),
                "r": self.r, "N": self.N, "H": self.H, "H_clear": self.H_clear, "H_bounded": self.H_bounded}


def connectivity_at_point(dom: DomainSpec, x, r: float, h: float | None = None) -> ConnectivityReport:
    """Components of ``B(x, r) & Omega``; those within two cells of ``x`` count towards ``N``."""
    x = np.asarray(x, dtype=float)
    h = min(dom.feature_size / 4, r / 32) if h is None else float(h)
    _check_resolution(dom, h) if math.isfinite(dom.feature_size) else None
    glo, shape = _grid(x - r, x + r, h)

    def fn(pts):
        return (np.linalg.norm(pts - x, axis=1) < r) & dom.grid_membership(pts, h)

    mask = _eval_mask(shape, glo, h, fn)
    labels, nlab = ndimage.label(mask, structure=_structure(dom.n))
    pts = glo + h * np.stack(np.unravel_index(np.arange(labels.size), shape), axis=1)
    dist = np.linalg.norm(pts - x, axis=1)
    flat = labels.reshape(-1)
    near = set(np.unique(flat[(dist <= 2 * h * math.sqrt(dom.n)) & (flat > 0)]).tolist())
    others = [int(v) for v in range(1, nlab + 1) if v not in near]
    clear = True
    if others:
        dmin = ndimage.minimum(dist.reshape(shape), labels, others)
        clear = bool(np.min(dmin) > 2 * h)
    return ConnectivityReport(x.tolist(), float(r), len(near), others, clear)


def connectivity_at_infinity(dom: DomainSpec, r: float, a=None, h: float | None = None,
                             r_max: float = R_MAX) -> ConnectivityReport:
    """``N(r, inf)`` (unbounded components outside ``closure(B(a, r))``) and whether ``H(r, inf)`` is bounded.

    ``H(r, inf)`` counts as bounded when every bounded component stays
    inside ``B(a, r_max / 2)``; this is a verdict at the tested scale.
    """
    a = np.zeros(dom.n) if a is None else np.asarray(a, dtype=float)
    comps = components_outside_ball(dom, a, r, h, r_max)
    unb = [c for c in comps if not c.bounded]
    bnd = [c for c in comps if c.bounded]
    hb = all(c.extent < r_max / 2 for c in bnd)
    return ConnectivityReport("infinity", float(r), len(unb), [c.id for c in bnd], True, hb)


@dataclass
class FiniteConnectednessResult:
    finitely_connected: bool
    reports: list
    counts_at_infinity: dict = field(default_factory=dict)
    reason: str = ""


def finitely_connected_at_boundary(
    domain_at: DomainSpec | Callable[[float], DomainSpec],
    probe_points: Sequence = (),
    radii: Sequence[float] = (),
    radii_at_infinity: Sequence[float] = (2.0,),
    h: float = 0.25,
    refinements: int = 1,
    r_max: float = R_MAX,
) -> FiniteConnectednessResult:
    """Check finite connectedness at the boundary at the scale of the grid.

    At finite boundary points ``x``: ``x`` is not in the closure of
    ``H(r, x)``.  At infinity: ``H(r, inf)`` is bounded,
    and ``N(r, inf)`` does not grow under refinement.

    Parameters
    ----------
    domain_at : DomainSpec or callable
        A domain, or a map ``h -> DomainSpec`` for families defined by
        infinitely many primitives (built to the resolution of ``h``).
    probe_points, radii :
        Finite boundary points and radii in (0, 1) for the finite-point condition.
    radii_at_infinity :
        Radii > 1 for the condition at infinity.
    h : float
        Coarsest grid spacing; each refinement halves it.
    refinements : int
        Number of halvings.  ``N(r, inf)`` that keeps growing under
        refinement means infinitely many unbounded components at the
        declared feature scale.
    """
    reports = []
    counts = {}
    ok = True
    reason = ""
    hs = [h / 2**i for i in range(refinements + 1)]
    for hh in hs:
        dom = domain_at(hh) if callable(domain_at) and not isinstance(domain_at, DomainSpec) else domain_at
        for r in radii_at_infinity:
            rep = connectivity_at_infinity(dom, r, h=hh, r_max=r_max)
            reports.append(rep)
            counts.setdefault(float(r), []).append(rep.N)
            if not rep.H_bounded:
                ok = False
                reason = f"H({r:g}, inf) is not bounded at the tested scale"
        if hh == hs[-1]:
            for x in probe_points:
                for r in radii:
                    rep = connectivity_at_point(dom, x, r, h=min(hh, r / 32))
                    reports.append(rep)
                    if not rep.H_clear:
                        ok = False
                        reason = f"x={list(x)} lies in the closure of H({r:g}, x)"
    for r, ns in counts.items():
        if len(ns) > 1 and ns[-1] > ns[0]:
            ok = False
            reason = f"N({r:g}, inf) grows under refinement: {ns}"
    return FiniteConnectednessResult(ok, reports, counts, reason)


@dataclass
class PorosityReport:
    is_porous: bool
    theta: float | None
    witnesses: list
    shells: list

    def to_dict(self):
        return {"is_porous": self.is_porous, "theta": self.theta,
                "witnesses": [[list(map(float, x)), float(t)] for x, t in self.witnesses], "shells": self.shells}


def _sqrt_up(q: Fraction) -> Fraction:
    """A rational upper bound of ``sqrt(q)``."""
    r = Fraction(math.sqrt(float(q))).limit_denominator(1 << 30)
    while r * r < q:
        r += Fraction(1, 1 << 30)
    return r


def _directions(n: int, count: int) -> np.ndarray:
    if n == 2:
        t = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    i = np.arange(count) + 0.5
    z = 1 - 2 * i / count
    phi = np.pi * (1 + 5**0.5) * i
    s = np.sqrt(1 - z**2)
    pts = np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)
    if n > 3:
        pts = np.concatenate([pts, np.zeros((count, n - 3))], axis=1)
    return pts


def porosity_at_infinity(dom: DomainSpec, a=None, component: int | None = None,
                         theta_grid: Sequence = (Fraction(1, 2), Fraction(1, 4), Fraction(1, 8), Fraction(1, 16)),
                         witness_count: int = 6, m0: int = 2, directions: int = 64) -> PorosityReport:
    """Search dyadic shells for balls ``B(x_j, theta |x_j - a|)`` missing the domain.

    A ball missing ``Omega`` misses every component of ``Omega \\ closure(B(a, k))``,
    so one witness set serves all components (``component`` is recorded
    only).  Each witness is certified by exact rational classification of
    a ball of rational radius at least ``theta |x_j - a|``.

    Returns the largest ``theta`` with a witness in every shell
    ``2^m <= |x - a| <= 2^(m+1)``, ``m = m0 .. m0 + witness_count - 1``.
    """
    n = dom.n
    a = np.zeros(n) if a is None else np.asarray(a, dtype=float)
    a_ex = tuple(Fraction(float(v)) for v in a)
    dirs = _directions(n, directions)
    thetas = sorted((Fraction(t) for t in theta_grid), reverse=True)
    shells = list(range(m0, m0 + witness_count))
    for th in thetas:
        found = []
        for m in shells:
            hit = None
            for frac in (Fraction(3, 2), Fraction(5, 4), Fraction(7, 4)):
                rad = frac * 2**m
                for d in dirs:
                    x = tuple(ai + Fraction(float(rad * di)).limit_denominator(1 << 20) for ai, di in zip(a_ex, d))
                    dist2 = sum((xi - ai) ** 2 for xi, ai in zip(x, a_ex))
                    if not (Fraction(4**m) <= dist2 <= Fraction(4 ** (m + 1))):
                        continue
                    rho = _sqrt_up(th * th * dist2)
                    if dom.ball_disjoint(x, rho, exact=True):
                        hit = (tuple(float(v) for v in x), float(th))
                        break
                if hit:
                    break
            if hit is None:
                break
            found.append(hit)
        if len(found) == len(shells):
            return PorosityReport(True, float(th), found, shells)
    return PorosityReport(False, None, [], shells)


@dataclass
class RegularityVerdict:
    verdict: str
    evidence: dict

    def to_dict(self):
        return {"verdict": self.verdict, "evidence": self.evidence}


def regularity_at_infinity_verdict(dom: DomainSpec, p: float, a=None, k: float = 2.0, h: float | None = None,
                                   r_max: float = R_MAX, porosity_kw: dict | None = None) -> RegularityVerdict:
    """Decision cascade for regularity of the point at infinity.

    In order: ``p < n``; no unbounded components of
    ``Omega \\ closure(B(a, k))``; porosity at infinity (one witness family
    covers every unbounded component); otherwise inconclusive.

    Raises
    ------
    GateError
        If ``p >= n`` and the complement of ``Omega`` has zero p-capacity.
    """
    from ..solver.pipeline import GateError

    n = dom.n
    a = np.zeros(n) if a is None else np.asarray(a, dtype=float)
    if p >= n and not dom.complement_has_positive_capacity(p):
        raise GateError(f"the complement has zero {p}-capacity and p >= n")
    if p < n:
        return RegularityVerdict("regular (p<Q)", {"p": p, "n": n})
    comps = components_outside_ball(dom, a, k, h, r_max)
    unb = [c for c in comps if not c.bounded]
    ev = {"k": k, "r_max": r_max, "components": [c.to_dict() for c in comps]}
    if not unb:
        return RegularityVerdict("regular (no unbounded components)", ev)
    por = porosity_at_infinity(dom, a, **(porosity_kw or {}))
    ev["porosity"] = por.to_dict()
    ev["per_component"] = {c.id: por.is_porous for c in unb}
    if por.is_porous:
        return RegularityVerdict("regular (porosity)", ev)
    return RegularityVerdict("inconclusive", ev)


def _pairwise_max(pts: np.ndarray, ctx: SphericalizationContext | None) -> float:
    """Largest pairwise distance (``d``, or ``d_a`` when ``ctx`` is given)."""
    if len(pts) < 2:
        return 0.0
    from scipy.spatial.distance import pdist

    if ctx is None:
        if len(pts) > 3:
            from scipy.spatial import ConvexHull, QhullError

            try:
                pts = pts[ConvexHull(pts).vertices]
            except QhullError:
                pass
        return float(np.max(pdist(pts)))
    w = 1.0 + np.linalg.norm(pts - ctx.base_point, axis=1)
    best = 0.0
    for s in range(0, len(pts), 512):
        blk = pts[s : s + 512]
        D = np.linalg.norm(blk[:, None, :] - pts[None, :, :], axis=-1) / np.outer(w[s : s + 512], w)
        best = max(best, float(D.max()))
    return best


def _segment_inside(dom: DomainSpec, p, q, h) -> bool:
    # samples at spacing h/2 always land within h/4 of any thin set crossed
    m = max(2, int(math.ceil(2 * np.linalg.norm(q - p) / h)) + 1)
    t = np.linspace(0.0, 1.0, m)[:, None]
    return bool(np.all(dom.grid_membership(p + t * (q - p), h)))


def _pull_strings(dom: DomainSpec, pts: np.ndarray, h: float) -> np.ndarray:
    """Greedy shortcutting of a polyline by straight segments inside the domain."""
    out = [pts[0]]
    i = 0
    last = len(pts) - 1
    while i < last:
        lo, hi = i + 1, last
        # largest visible vertex, assuming visibility is roughly monotone
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if _segment_inside(dom, pts[i], pts[mid], h):
                lo = mid
            else:
                hi = mid - 1
        if lo > i + 1 and not _segment_inside(dom, pts[i], pts[lo], h):
            lo = i + 1
        out.append(pts[lo])
        i = lo
    return np.array(out)


def _densify(poly: np.ndarray, h: float) -> np.ndarray:
    parts = []
    for p, q in zip(poly[:-1], poly[1:]):
        m = max(2, int(math.ceil(np.linalg.norm(q - p) / h)) + 1)
        parts.append(p + np.linspace(0.0, 1.0, m)[:, None] * (q - p))
    return np.vstack(parts) if parts else poly


def mazurkiewicz_distance(dom: DomainSpec, x, y, frame: str = "d", h: float = 1 / 32,
                          ctx: SphericalizationContext | None = None, centers: int = 3,
                          window: float | None = None) -> float:
    """Upper estimate of the Mazurkiewicz distance between ``x`` and ``y``.

    Candidate connected sets are polylines inside ``Omega``.  They are found
    on the grid inside sublevel sets of two families, the lens
    ``max(dist(z, x), dist(z, y)) <= D`` and balls ``B(c, rho)`` with centres
    on the bisector of ``x`` and ``y``, with the level found by bisection.
    The grid path is then shortened by straight segments checked against
    the domain.  The smallest diameter (in ``d``, or in ``d_a``, the upper
    bound of ``dhat_a``) over all candidates is returned; ``inf`` when the
    grid does not join the points.
    """
    from scipy import sparse
    from scipy.sparse.csgraph import breadth_first_order

    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (dom.membership(x[None])[0] and dom.membership(y[None])[0]):
        raise ValueError("x and y must lie in the domain")
    if np.array_equal(x, y):
        return 0.0
    if frame not in ("d", "dhat"):
        raise ValueError("frame must be 'd' or 'dhat'")
    if frame == "dhat" and ctx is None:
        raise ValueError("frame 'dhat' needs a SphericalizationContext")
    mctx = ctx if frame == "dhat" else None
    n = dom.n
    L = float(np.linalg.norm(x - y))
    W = window if window is not None else 4 * L + 4
    mid = 0.5 * (x + y)
    glo, shape = _grid(mid - W, mid + W, h)
    mask = _eval_mask(shape, glo, h, lambda p: dom.grid_membership(p, h))
    ix = tuple(np.round((x - glo) / h).astype(int))
    iy = tuple(np.round((y - glo) / h).astype(int))
    mask[ix] = mask[iy] = True
    labels, _ = ndimage.label(mask, structure=_structure(n))
    if labels[ix] != labels[iy]:
        return math.inf
    pts_all = glo + h * np.stack(np.unravel_index(np.arange(mask.size), shape), axis=1)
    sx = int(np.ravel_multi_index(ix, shape))
    sy = int(np.ravel_multi_index(iy, shape))
    strides = [int(np.prod(shape[k + 1 :])) for k in range(n)]

    def path_in(sub: np.ndarray):
        flat = sub.reshape(-1).copy()
        flat[[sx, sy]] = True
        ids = np.flatnonzero(flat)
        pos = np.full(flat.size, -1)
        pos[ids] = np.arange(len(ids))
        coords = np.stack(np.unravel_index(ids, shape), axis=1)
        rows, cols = [], []
        for k in range(n):
            ok = coords[:, k] + 1 < shape[k]
            nb = ids[ok] + strides[k]
            good = flat[nb]
            rows.append(pos[ids[ok][good]])
            cols.append(pos[nb[good]])
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        G = sparse.coo_matrix((np.ones(len(r)), (r, c)), shape=(len(ids), len(ids))).tocsr()
        _, pred = breadth_first_order(G + G.T, pos[sx], directed=False, return_predecessors=True)
        if pred[pos[sy]] < 0:
            return None
        path = [pos[sy]]
        while path[-1] != pos[sx]:
            path.append(pred[path[-1]])
        return ids[np.array(path[::-1])]

    def dist_to(z):
        if mctx is None:
            return np.linalg.norm(pts_all - z, axis=1)
        w = 1.0 + np.linalg.norm(pts_all - mctx.base_point, axis=1)
        return np.linalg.norm(pts_all - z, axis=1) / (w * (1.0 + np.linalg.norm(z - mctx.base_point)))

    fields = [np.maximum(dist_to(x), dist_to(y))]
    e = (y - x) / L
    normal = np.zeros(n)
    normal[:2] = [-e[1], e[0]]
    for s in np.linspace(-1.0, 1.0, centers):
        fields.append(dist_to(mid + s * L * normal))
    best = math.inf
    for val in fields:
        val = val.reshape(shape)
        lo_v = max(val[ix], val[iy])
        hi_v = float(np.max(val[mask]))
        if path_in(mask & (val <= hi_v)) is None:
            continue
        for _ in range(40):
            if hi_v - lo_v <= 1e-3 * h:
                break
            m = 0.5 * (lo_v + hi_v)
            if path_in(mask & (val <= m)) is None:
                lo_v = m
            else:
                hi_v = m
        path = path_in(mask & (val <= hi_v))
        poly = np.vstack([x, pts_all[path[1:-1]], y]) if len(path) > 2 else np.vstack([x, y])
        poly = _pull_strings(dom, poly, h)
        if not all(_segment_inside(dom, p, q, h) for p, q in zip(poly[:-1], poly[1:])):
            continue
        pts = poly if mctx is None else _densify(poly, h)
        best = min(best, _pairwise_max(pts, mctx))
    return best


def slit_mazurkiewicz_oracle(x, y, length: float = 1.0) -> float:
    """Exact ``d_M`` for points on opposite sides of the slit ``{0} x [-length, length]``.

    A connected set joining them crosses the axis at some ``z = (0, t)``
    with ``|t| >= length``; the two-segment path through the nearer tip is
    optimal, so ``d_M = max(|x-y|, inf_t max(|x-z|, |y-z|))``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    from scipy.optimize import minimize_scalar

    def f(t):
        z = np.array([0.0, t])
        return max(np.linalg.norm(x - z), np.linalg.norm(y - z))

    best = math.inf
    for sgn in (1.0, -1.0):
        res = minimize_scalar(lambda s: f(sgn * (length + s * s)), bracket=(0.0, 1.0))
        best = min(best, f(sgn * length), float(res.fun))
    return max(float(np.linalg.norm(x - y)), best)


@dataclass
class ParabolicityReport:
    radii: list
    energies: list
    slope: float
    verdict: str
    nonincreasing: bool
    reports: list = field(default_factory=list)

    def to_dict(self):
        return {"radii": self.radii, "energies": self.energies, "slope": self.slope, "verdict": self.verdict,
                "nonincreasing": self.nonincreasing}


def _direction_mask(dom: DomainSpec, direction, a, h, R_top, axisymmetric) -> Callable:
    """Membership in the direction's deepest component, on a grid of spacing ``h``."""
    if direction is None:
        return lambda x: np.ones(len(x), dtype=bool)
    if axisymmetric:
        raise ValueError("directions are not supported in the meridian reduction")
    lab = _label_outside_ball(dom, a, direction.levels[-1], h, R_top + 8 * h)
    ref = direction.anchor if direction.anchor is not None else direction.representatives[-1]
    j = np.round((np.asarray(ref, dtype=float) - lab.lo) / h).astype(int)
    inside = np.all((j >= 0) & (j < np.array(lab.labels.shape)))
    target = int(lab.labels[tuple(j)]) if inside else 0
    if target == 0:
        raise ResolutionError("the direction's representative is not resolved on the condenser grid")
    shape = np.array(lab.labels.shape)

    def mask(x):
        j = np.round((np.asarray(x, dtype=float) - lab.lo) / h).astype(int)
        ok = np.all((j >= 0) & (j < shape), axis=1)
        out = np.zeros(len(x), dtype=bool)
        out[ok] = lab.labels[tuple(j[ok].T)] == target
        return out

    return mask


def p_parabolicity_estimate(dom: DomainSpec, direction: DirectionAtInfinity | None, p: float, J: int = 5,
                            a=None, rho0: float = 2.0, h: float = 1 / 16, symmetry_axes=(),
                            axisymmetric: bool = False, parabolic_slope: float = -0.75,
                            nonparabolic_slope: float = -0.5, fit_last: int = 3, options=None) -> ParabolicityReport:
    """Condenser energies between ``closure(B(a, rho0))`` and the far part of a direction.

    For level ``j = 1..J`` the outer plate is the part of the direction's
    component lying outside ``B(a, R_j)``, ``R_j = rho0 2^j``; ``u`` is free
    (natural condition) on the rest of the boundary of ``Omega``.  The
    verdict uses the slope of ``log E_j`` against ``log j`` over the last
    ``fit_last`` levels: at most ``parabolic_slope`` means energies decay
    like ``1/log R`` or faster (parabolic trend), at least
    ``nonparabolic_slope`` means they level off.
    """
    from ..solver.capacity import condenser_energy

    n = dom.n
    a = np.zeros(n) if a is None else np.asarray(a, dtype=float)
    if direction is not None and direction.depth < 1:
        raise ValueError("direction too shallow")
    in_direction = _direction_mask(dom, direction, a, h, rho0 * 2.0**J, axisymmetric)
    energies, radii, reps = [], [], []
    for j in range(1, J + 1):
        R = rho0 * 2.0**j
        inner = Ball(a, rho0)

        def outer(x, R=R):
            return (np.linalg.norm(x - a, axis=1) >= R) & in_direction(x)

        if axisymmetric:
            lo = np.array([0.0, -R - 2 * h])
            hi = np.array([R + 2 * h, R + 2 * h])
        else:
            lo = a - R - 2 * h
            hi = a + R + 2 * h
        for ax in symmetry_axes:
            lo[ax] = 0.0 if not axisymmetric else lo[ax]
        if axisymmetric and 1 in symmetry_axes:
            lo[1] = 0.0
        res = condenser_energy(outer, inner, p, h, (lo, hi), region=dom.region, symmetry_axes=symmetry_axes,
                               axisymmetric=axisymmetric, options=options)
        energies.append(res.value)
        radii.append(R)
        reps.append(res.report.to_dict() if res.report else None)
    E = np.array(energies)
    nonincreasing = bool(np.all(np.diff(E) <= 1e-9 * np.max(np.abs(E))))
    js = np.arange(1, J + 1)[-fit_last:]
    if np.any(E[-fit_last:] <= 0):
        slope = -math.inf
    else:
        slope = float(np.polyfit(np.log(js), np.log(E[-fit_last:]), 1)[0])
    if slope <= parabolic_slope:
        verdict = "parabolic-trend"
    elif slope >= nonparabolic_slope:
        verdict = "non-parabolic-trend"
    else:
        verdict = "inconclusive"
    return ParabolicityReport(radii, energies, slope, verdict, nonincreasing, reps)
