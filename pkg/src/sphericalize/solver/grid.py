"""Cartesian grid problems for the weighted discrete p-energy.

Nodes sit at ``lo + h * index``.  Every cell contributes through a single
forward-difference gradient built from its base node and the ``n`` nodes
one step ahead along each axis, so each cell couples ``n + 1`` nodes.

Node kinds: ``INACTIVE`` nodes are ignored, ``INTERIOR`` nodes are
unknowns and ``DIRICHLET`` nodes hold data.  Box faces listed as Neumann
faces get the natural boundary condition (used for symmetry planes).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage, sparse

from ..geometry import DimensionError
from ..measures import WeightSpec

__all__ = [
    "INACTIVE",
    "INTERIOR",
    "DIRICHLET",
    "GridProblem",
    "ScalarField",
    "FloatingRegionError",
    "build_problem",
    "grid_box",
    "coupling_offsets",
    "cell_weights",
]

INACTIVE, INTERIOR, DIRICHLET = 0, 1, 2


class FloatingRegionError(ValueError):
    """Some interior nodes are not connected to any Dirichlet node."""


def coupling_offsets(n: int) -> list[tuple[int, ...]]:
    """Index offsets of nodes sharing a cell stencil with a given node."""
    offs = set()
    eye = np.eye(n, dtype=int)
    for j in range(n):
        offs.add(tuple(eye[j]))
        offs.add(tuple(-eye[j]))
        for k in range(n):
            if k != j:
                offs.add(tuple(eye[j] - eye[k]))
    return sorted(offs)


def _shift(mask: np.ndarray, off: Sequence[int]) -> np.ndarray:
    """``out[i] = mask[i - off]`` with False outside the array."""
    out = np.zeros_like(mask)
    src, dst = [], []
    for o, N in zip(off, mask.shape):
        if o >= 0:
            src.append(slice(0, N - o))
            dst.append(slice(o, N))
        else:
            src.append(slice(-o, N))
            dst.append(slice(0, N + o))
    out[tuple(dst)] = mask[tuple(src)]
    return out


def grid_box(lo, hi, h: float, anchor=None):
    """Snap a box to a lattice of spacing ``h`` through ``anchor`` (default 0).

    Returns the snapped lower corner and the node counts.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    anchor = np.zeros_like(lo) if anchor is None else np.asarray(anchor, dtype=float)
    i0 = np.floor((lo - anchor) / h + 1e-9)
    i1 = np.ceil((hi - anchor) / h - 1e-9)
    shape = tuple(int(v) for v in (i1 - i0 + 1))
    return anchor + i0 * h, shape


_GAUSS2 = np.array([-1.0, 1.0]) / math.sqrt(3.0)
_GAUSS3_X, _GAUSS3_W = np.polynomial.legendre.leggauss(3)


def _gauss_cell_average(weight: WeightSpec, corners: np.ndarray, h: float) -> np.ndarray:
    n = corners.shape[1]
    pts = [(g + 1) / 2 * h for g in _GAUSS2]
    acc = np.zeros(len(corners))
    for combo in itertools.product(pts, repeat=n):
        acc += weight.evaluate(corners + np.array(combo))
    return acc / 2**n


def _singular_cell_average(weight: WeightSpec, corner: np.ndarray, h: float, depth: int = 0) -> float:
    """Average over a cell touching the singular point by geometric refinement."""
    n = corner.size
    s = weight.singular_point
    half = h / 2
    total = 0.0
    for combo in itertools.product((0.0, half), repeat=n):
        c = corner + np.array(combo)
        touches = np.all(s >= c - 1e-15 * h) and np.all(s <= c + half + 1e-15 * h)
        if touches and depth < 40:
            total += _singular_cell_average(weight, c, half, depth + 1)
        elif touches:
            # remaining volume is negligible; a far Gauss point keeps it finite
            total += float(weight.evaluate((c + half * (1 + 1 / math.sqrt(3)) / 2)[None])[0])
        else:
            pts = (_GAUSS3_X + 1) / 2 * half
            wts = _GAUSS3_W / 2
            acc = 0.0
            for idx in itertools.product(range(3), repeat=n):
                x = c + pts[list(idx)]
                acc += np.prod(wts[list(idx)]) * float(weight.evaluate(x[None])[0])
            total += acc
    return total / 2**n


def cell_weights(weight: WeightSpec | None, corners: np.ndarray, h: float) -> np.ndarray:
    """Cell averages of ``weight``; exact-ish refinement near its singular point."""
    if weight is None:
        return np.ones(len(corners))
    w = _gauss_cell_average(weight, corners, h)
    s = getattr(weight, "singular_point", None)
    if s is not None and getattr(weight, "singular_exponent", 0.0) != 0.0:
        s = np.asarray(s, dtype=float)
        near = np.all((corners <= s + 2 * h) & (corners + h >= s - 2 * h), axis=1)
        for i in np.flatnonzero(near):
            w[i] = _singular_cell_average(weight, corners[i], h)
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("cell weights must be positive and finite")
    return w


@dataclass
class GridProblem:
    """A bounded weighted Dirichlet problem on a Cartesian grid.

    Attributes
    ----------
    lo : ndarray
        Coordinates of node index 0.
    h : float
        Grid spacing.
    kind : ndarray of int8
        Node classification, shape = node counts.
    data : ndarray
        Boundary values (meaningful at Dirichlet nodes).
    p : float
    cell_base : ndarray
        Flat index of the base node of each active cell.
    cell_weight : ndarray
        Cell average of the weight.
    infinity_node : int or None
        Flat index of the node standing for infinity (or its image).
    infinity_node_active : bool
        Whether that node carries data.
    """

    lo: np.ndarray
    h: float
    kind: np.ndarray
    data: np.ndarray
    p: float
    cell_base: np.ndarray
    cell_weight: np.ndarray
    infinity_node: int | None = None
    infinity_node_active: bool = False
    weight: WeightSpec | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.p <= 1:
            raise ValueError("p must exceed 1")
        self.shape = self.kind.shape
        self.n = self.kind.ndim
        self.strides = np.array([int(np.prod(self.shape[k + 1 :])) for k in range(self.n)], dtype=np.int64)
        flat = self.kind.reshape(-1)
        self.free = np.flatnonzero(flat == INTERIOR)
        self.dirichlet = np.flatnonzero(flat == DIRICHLET)
        self.free_index = np.full(flat.size, -1, dtype=np.int64)
        self.free_index[self.free] = np.arange(self.free.size)
        self._pattern = None

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def coords(self, flat_idx) -> np.ndarray:
        idx = np.stack(np.unravel_index(np.asarray(flat_idx), self.shape), axis=-1)
        return self.lo + self.h * idx

    def stencil(self) -> np.ndarray:
        """(M, n+1) flat indices: base node then its forward neighbours."""
        return np.concatenate([self.cell_base[:, None], self.cell_base[:, None] + self.strides[None, :]], axis=1)

    def boundary_vector(self) -> np.ndarray:
        """Full nodal vector with data on Dirichlet nodes and zero elsewhere."""
        u = np.zeros(self.size)
        u[self.dirichlet] = self.data.reshape(-1)[self.dirichlet]
        return u

    def expand(self, u_free: np.ndarray) -> np.ndarray:
        u = self.boundary_vector()
        u[self.free] = u_free
        return u

    def data_bounds(self) -> tuple[float, float]:
        vals = self.data.reshape(-1)[self.dirichlet]
        if vals.size == 0:
            return (0.0, 0.0)
        return float(vals.min()), float(vals.max())

    def with_data(self, data: np.ndarray) -> "GridProblem":
        """Same grid and weights, new boundary values (pattern shared)."""
        new = GridProblem(self.lo, self.h, self.kind, np.asarray(data, dtype=float).reshape(self.shape), self.p,
                          self.cell_base, self.cell_weight, self.infinity_node, self.infinity_node_active,
                          self.weight, dict(self.meta))
        new._pattern = self._pattern
        return new

    def with_p(self, p: float) -> "GridProblem":
        new = self.with_data(self.data)
        new.p = p
        return new

    # --- energy and derivatives -------------------------------------------

    def cell_gradients(self, u: np.ndarray) -> np.ndarray:
        base = self.cell_base
        u0 = u[base]
        return np.stack([(u[base + s] - u0) for s in self.strides], axis=1) / self.h

    def energy(self, u: np.ndarray, eps: float = 0.0) -> float:
        """``sum w h^n (|grad_h u|^2 + eps^2)^(p/2)`` over active cells."""
        G = self.cell_gradients(u)
        s = np.einsum("ij,ij->i", G, G) + eps * eps
        return float(np.sum(self.cell_weight * s ** (self.p / 2)) * self.h**self.n)

    def gradient(self, u: np.ndarray, eps: float) -> np.ndarray:
        """Derivative of the regularized energy w.r.t. every nodal value."""
        G = self.cell_gradients(u)
        s = np.einsum("ij,ij->i", G, G) + eps * eps
        with np.errstate(divide="ignore", invalid="ignore"):
            a = self.cell_weight * self.p * np.where(s > 0, s ** (self.p / 2 - 1), 0.0)
        coef = a * self.h ** (self.n - 1)
        F = G * coef[:, None]
        g = np.bincount(self.cell_base, weights=-F.sum(axis=1), minlength=self.size)
        for k, st in enumerate(self.strides):
            g += np.bincount(self.cell_base + st, weights=F[:, k], minlength=self.size)
        return g

    def _build_pattern(self):
        n1 = self.n + 1
        st = self.stencil()
        fi = self.free_index[st]
        I = np.repeat(fi, n1, axis=1).reshape(-1)
        J = np.tile(fi, (1, n1)).reshape(-1)
        keep = (I >= 0) & (J >= 0)
        nf = self.free.size
        key = I[keep] * nf + J[keep]
        ukey, pos = np.unique(key, return_inverse=True)
        rows = ukey // nf
        cols = ukey % nf
        indptr = np.searchsorted(rows, np.arange(nf + 1))
        self._pattern = (keep, pos.astype(np.int64), indptr, cols.astype(np.int32), ukey.size)

    def hessian(self, u: np.ndarray, eps: float, p: float | None = None) -> sparse.csr_matrix:
        """Hessian of the regularized energy restricted to the free nodes."""
        p = self.p if p is None else p
        if self._pattern is None:
            self._build_pattern()
        keep, pos, indptr, cols, nnz = self._pattern
        n = self.n
        G = self.cell_gradients(u)
        s = np.einsum("ij,ij->i", G, G) + eps * eps
        if p == 2:
            c1 = np.full_like(s, 2.0)
            c2 = np.zeros_like(s)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                c1 = p * np.where(s > 0, s ** (p / 2 - 1), 0.0)
                c2 = p * (p - 2) * np.where(s > 0, s ** (p / 2 - 2), 0.0)
        scale = self.cell_weight * self.h ** (n - 2)
        B = (c1 * scale)[:, None, None] * np.eye(n)[None] + (c2 * scale)[:, None, None] * G[:, :, None] * G[:, None, :]
        L = np.empty((len(G), n + 1, n + 1))
        L[:, 1:, 1:] = B
        col = B.sum(axis=1)
        L[:, 0, 1:] = -col
        L[:, 1:, 0] = -col
        L[:, 0, 0] = col.sum(axis=1)
        vals = np.bincount(pos, weights=L.reshape(-1)[keep], minlength=nnz)
        nf = self.free.size
        return sparse.csr_matrix((vals, cols, indptr), shape=(nf, nf))

    def residual(self, u: np.ndarray) -> np.ndarray:
        """Discrete ``-div(w |grad u|^(p-2) grad u)`` at every node (energy derivative / (p h^n))."""
        return self.gradient(u, 0.0) / (self.p * self.h**self.n)

    def check_no_floating(self) -> None:
        act = self.kind != INACTIVE
        struct = np.zeros((3,) * self.n, dtype=bool)
        center = (1,) * self.n
        struct[center] = True
        for off in coupling_offsets(self.n):
            struct[tuple(c + o for c, o in zip(center, off))] = True
        lab, nlab = ndimage.label(act, structure=struct)
        if nlab == 0:
            return
        has_d = np.zeros(nlab + 1, dtype=bool)
        has_d[lab[self.kind == DIRICHLET]] = True
        has_i = np.zeros(nlab + 1, dtype=bool)
        has_i[lab[self.kind == INTERIOR]] = True
        bad = np.flatnonzero(has_i & ~has_d)
        if bad.size:
            raise FloatingRegionError(f"{bad.size} interior region(s) have no Dirichlet node")


def build_problem(
    interior: np.ndarray,
    lo,
    h: float,
    p: float,
    data: Callable | float = 0.0,
    weight: WeightSpec | None = None,
    neumann_faces: Sequence[tuple[int, int]] = (),
    dirichlet: np.ndarray | None = None,
    infinity_node: int | None = None,
    infinity_node_active: bool = False,
    check_floating: bool = True,
    meta: dict | None = None,
    inactive: np.ndarray | None = None,
) -> GridProblem:
    """Classify nodes, sample data and weights, and return a :class:`GridProblem`.

    Parameters
    ----------
    interior : ndarray of bool
        Nodes inside the open domain (candidate unknowns).
    lo : array_like
        Coordinates of node index 0.
    h : float
    p : float
    data : callable or float
        Boundary values; a callable receives an (m, n) array of Dirichlet
        node coordinates.
    weight : WeightSpec, optional
        Density of the reference measure (Lebesgue if omitted).
    neumann_faces : sequence of (axis, side)
        Box faces (side 0 = low, 1 = high) with the natural condition.
        Interior nodes on any other box face become Dirichlet nodes.
    dirichlet : ndarray of bool, optional
        Extra nodes forced to be Dirichlet (e.g. a condenser plate).
    infinity_node : int, optional
        Flat index of the node standing for infinity.  It is a Dirichlet
        node when ``infinity_node_active`` and a free node otherwise.
    inactive : ndarray of bool, optional
        Nodes that never become Dirichlet nodes; cells touching them are
        dropped, which imposes the natural condition there.
    """
    interior = np.array(interior, dtype=bool)
    n = interior.ndim
    lo = np.asarray(lo, dtype=float)
    if lo.shape != (n,):
        raise DimensionError("lo does not match the grid dimension")
    kind = np.zeros(interior.shape, dtype=np.int8)
    forced = np.zeros_like(interior) if dirichlet is None else np.asarray(dirichlet, dtype=bool)
    inside = interior & ~forced
    face_d = np.zeros_like(inside)
    nf = set(tuple(f) for f in neumann_faces)
    for k in range(n):
        for side in (0, 1):
            if (k, side) in nf:
                continue
            sl = [slice(None)] * n
            sl[k] = 0 if side == 0 else -1
            face_d[tuple(sl)] = True
    if infinity_node is not None:
        idx = np.unravel_index(infinity_node, interior.shape)
        if infinity_node_active:
            inside[idx] = False
            forced[idx] = True
        else:
            inside[idx] = True
    inside_free = inside & ~face_d
    if infinity_node is not None and not infinity_node_active:
        inside_free[np.unravel_index(infinity_node, interior.shape)] = True
    kind[inside_free] = INTERIOR
    near = np.zeros_like(inside_free)
    for off in coupling_offsets(n):
        near |= _shift(inside_free, off)
    new_d = near & ~inside_free
    if inactive is not None:
        new_d &= ~np.asarray(inactive, dtype=bool)
    kind[new_d] = DIRICHLET
    if infinity_node is not None and infinity_node_active:
        kind[np.unravel_index(infinity_node, interior.shape)] = DIRICHLET
    # cells whose whole stencil is active
    shape = interior.shape
    strides = np.array([int(np.prod(shape[k + 1 :])) for k in range(n)], dtype=np.int64)
    act = (kind != INACTIVE)
    cm = act[tuple(slice(0, N - 1) for N in shape)].copy()
    for k in range(n):
        sl = [slice(0, N - 1) for N in shape]
        sl[k] = slice(1, shape[k])
        cm &= act[tuple(sl)]
    cidx = np.stack(np.nonzero(cm), axis=1)
    cell_base = (cidx * strides).sum(axis=1).astype(np.int64)
    # free nodes outside every active cell do not enter the energy
    used = np.zeros(kind.size, dtype=bool)
    used[cell_base] = True
    for k in range(n):
        used[cell_base + strides[k]] = True
    orphan = (kind.reshape(-1) == INTERIOR) & ~used
    if np.any(orphan):
        kind.reshape(-1)[orphan] = INACTIVE
    corners = lo + h * cidx
    cw = cell_weights(weight, corners, h)
    dvals = np.zeros(shape)
    dmask = kind == DIRICHLET
    if callable(data):
        pts = lo + h * np.stack(np.nonzero(dmask), axis=1)
        vals = np.asarray(data(pts), dtype=float).reshape(-1) if len(pts) else np.zeros(0)
        if not np.all(np.isfinite(vals)):
            raise ValueError("boundary data must be finite")
        dvals[dmask] = vals
    else:
        dvals[dmask] = float(data)
    prob = GridProblem(lo, float(h), kind, dvals, float(p), cell_base, cw, infinity_node,
                       bool(infinity_node_active), weight, dict(meta or {}))
    if check_floating:
        prob.check_no_floating()
    return prob


@dataclass
class ScalarField:
    """Nodal values of a grid function over a :class:`GridProblem`."""

    problem: GridProblem
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.values.size != self.problem.size:
            raise ValueError("field size does not match the grid")

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.problem.kind.reshape(-1) != INACTIVE)

    def as_array(self, fill=np.nan) -> np.ndarray:
        out = np.full(self.problem.size, fill)
        a = self.active
        out[a] = self.values[a]
        return out.reshape(self.problem.shape)

    def __call__(self, x) -> np.ndarray:
        """Multilinear interpolation; falls back to the nearest active node."""
        from scipy.interpolate import RegularGridInterpolator

        prob = self.problem
        x = np.atleast_2d(np.asarray(x, dtype=float))
        axes = [prob.lo[k] + prob.h * np.arange(prob.shape[k]) for k in range(prob.n)]
        arr = self.as_array()
        interp = RegularGridInterpolator(axes, arr, bounds_error=False, fill_value=np.nan)
        out = interp(x)
        bad = ~np.isfinite(out)
        if np.any(bad):
            from scipy.spatial import cKDTree

            act = self.active
            tree = cKDTree(prob.coords(act))
            _, j = tree.query(x[bad])
            out[bad] = self.values[act[j]]
        return out

    def __le__(self, other: "ScalarField"):
        a = self.active
        return self.values[a] <= other.values[a]

    def __ge__(self, other: "ScalarField"):
        a = self.active
        return self.values[a] >= other.values[a]
