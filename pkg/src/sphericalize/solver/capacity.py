"""Condenser energies and variational capacity on grids.

A condenser is a pair of closed plates: ``u = 1`` on one, ``u = 0`` on the
other, free elsewhere in the region and natural (no condition) on the rest
of its boundary.  The variational capacity of ``E`` in a window ``W`` is the
condenser energy with plates ``closure(E)`` and ``R^n \\ W``; forcing
``u = 1`` on ``E`` loses nothing since truncating at 1 lowers the energy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..domains.csg import Region, Whole
from ..measures import Lebesgue, WeightSpec
from .grid import GridProblem, ScalarField, build_problem, grid_box
from .newton import SolveReport, SolverOptions, solve_dirichlet
from .pipeline import AxisymmetricWeight, _lift

__all__ = ["CapacityResult", "condenser_problem", "condenser_energy", "variational_capacity"]


@dataclass
class CapacityResult:
    """Condenser energy over the full (unreduced) space."""

    value: float
    field: ScalarField | None
    report: SolveReport | None
    problem: GridProblem | None
    factor: float = 1.0
    meta: dict = field(default_factory=dict)


def _pred(region, thickness=0.0, closed=False) -> Callable:
    if region is None:
        return lambda x: np.zeros(len(x), dtype=bool)
    if callable(region) and not isinstance(region, Region):
        return region
    if closed:
        return lambda x: region.closure_contains(x, thickness)
    return lambda x: region.contains_thick(x, thickness)


def condenser_problem(
    one,
    zero,
    p: float,
    h: float,
    box,
    region=None,
    symmetry_axes=(),
    axisymmetric: bool = False,
    weight: WeightSpec | None = None,
) -> tuple[GridProblem | None, float]:
    """Grid problem of a condenser.

    Parameters
    ----------
    one, zero : Region or callable
        The plates (closures are used for regions); a callable gets an
        (m, n) array of points and returns a boolean mask.
    p, h : float
    box : pair of array_like
        Grid window.  All box faces carry the natural condition, so the box
        must reach beyond the plates wherever the region does.
    region : Region, optional
        The open set hosting the condenser (whole space if omitted).
        Outside it the nodes are inactive.
    symmetry_axes : sequence of int
        Grid axes whose low face is a symmetry plane; the energy is
        multiplied by 2 per axis.
    axisymmetric : bool
        Grid coordinates are ``(rho, z)`` for a problem in R^n invariant
        under rotations about the last axis; ``box`` is given in these
        coordinates and ``rho`` must start at 0.

    Returns
    -------
    (GridProblem or None, factor)
        ``None`` when the ``one`` plate has no nodes.
    """
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    glo, shape = grid_box(lo, hi, h)
    m = len(shape)
    n = (region.n if isinstance(region, Region) else None) or _dim(one, zero, m, axisymmetric)
    lift = (lambda z: _lift(z, n)) if axisymmetric else (lambda z: z)
    if axisymmetric and glo[0] < -1e-12:
        raise ValueError("the rho axis must start at 0")
    idx = np.indices(shape).reshape(m, -1).T
    X = lift(glo + h * idx)
    in_one = _pred(one, closed=True)(X)
    in_zero = _pred(zero, closed=True)(X) & ~in_one
    inside = np.ones(len(X), dtype=bool) if region is None else _pred(region, 0.5 * h * (1 + 1e-9))(X)
    # plates only act inside the region
    in_one &= inside
    in_zero &= inside
    if not np.any(in_one):
        return None, 1.0
    free = inside & ~in_one & ~in_zero
    inactive = ~(in_one | in_zero | free)
    data = np.where(in_one, 1.0, 0.0).reshape(shape)
    base = weight or Lebesgue(n)
    w = AxisymmetricWeight(base, n) if axisymmetric else (weight if weight is not None else None)
    faces = [(k, s) for k in range(m) for s in (0, 1)]
    origin_idx = np.round(-glo / h).astype(int)

    def datafn(pts):
        j = np.round((pts - glo) / h).astype(int)
        return data[tuple(j.T)]

    prob = build_problem(free.reshape(shape), glo, h, p, datafn, weight=w, neumann_faces=faces,
                         inactive=inactive.reshape(shape), check_floating=False,
                         meta={"condenser": True, "axisymmetric": axisymmetric,
                               "origin_index": origin_idx.tolist()})
    factor = 2.0 ** len(tuple(symmetry_axes))
    return prob, factor


def _dim(one, zero, m, axisymmetric):
    for r in (one, zero):
        if isinstance(r, Region):
            return r.n
    if axisymmetric:
        raise ValueError("pass a region to fix the ambient dimension")
    return m


def condenser_energy(one, zero, p, h, box, region=None, symmetry_axes=(), axisymmetric=False,
                     weight=None, options: SolverOptions | None = None) -> CapacityResult:
    """Minimal discrete p-energy of the condenser (see :func:`condenser_problem`)."""
    prob, factor = condenser_problem(one, zero, p, h, box, region, symmetry_axes, axisymmetric, weight)
    if prob is None:
        return CapacityResult(0.0, None, None, None, factor, {"empty": True})
    if prob.free.size:
        # each free node must see a plate, else its component carries u = const
        prob = _drop_floating(prob)
    u, rep = solve_dirichlet(prob, options)
    return CapacityResult(factor * rep.energy, u, rep, prob, factor)


def _drop_floating(prob: GridProblem) -> GridProblem:
    try:
        prob.check_no_floating()
    except Exception:
        # components without a plate minimize at a constant: zero energy,
        # so they can be made inactive without changing the minimum
        from scipy import ndimage

        from .grid import DIRICHLET, INACTIVE, INTERIOR, coupling_offsets

        kind = prob.kind.copy()
        structure = np.zeros((3,) * prob.n, dtype=bool)
        c = (1,) * prob.n
        structure[c] = True
        for off in coupling_offsets(prob.n):
            structure[tuple(1 + o for o in off)] = True
        lab, nlab = ndimage.label(kind != INACTIVE, structure=structure)
        keep = np.unique(lab[kind == DIRICHLET])
        bad = (kind == INTERIOR) & ~np.isin(lab, keep)
        kind[bad] = INACTIVE
        prob = _rebuild(prob, kind)
    return prob


def _rebuild(prob: GridProblem, kind: np.ndarray) -> GridProblem:
    from .grid import DIRICHLET, INTERIOR

    interior = kind == INTERIOR
    inactive = ~(interior | (kind == DIRICHLET))
    data = prob.data

    def datafn(pts):
        j = np.round((pts - prob.lo) / prob.h).astype(int)
        return data[tuple(j.T)]

    faces = [(k, s) for k in range(prob.n) for s in (0, 1)]
    return build_problem(interior, prob.lo, prob.h, prob.p, datafn, weight=prob.weight, neumann_faces=faces,
                         inactive=inactive, check_floating=True, meta=prob.meta)


def variational_capacity(E, window, p: float, h: float, box=None, symmetry_axes=(), axisymmetric=False,
                         weight=None, options: SolverOptions | None = None) -> CapacityResult:
    """Variational p-capacity of ``closure(E)`` relative to the open window.

    ``E`` may be ``None`` (empty set, capacity 0).  ``box`` defaults to the
    window's bounding box padded by two cells.
    """
    if E is None:
        return CapacityResult(0.0, None, None, None, 1.0, {"empty": True})
    if box is None:
        lo, hi = window.bounding_box()
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("window must be bounded or a box must be given")
        lo, hi = lo - 2 * h, hi + 2 * h
        if axisymmetric:
            lo = np.array([0.0, lo[-1]])
            hi = np.array([max(abs(hi[0]), abs(lo[0])), hi[-1]])
        for k in symmetry_axes:
            lo[k] = 0.0
        box = (lo, hi)
    outside = lambda x: ~window.contains(x)  # noqa: E731
    return condenser_energy(E, outside, p, h, box, region=Whole(E.n) if isinstance(E, Region) else None,
                            symmetry_axes=symmetry_axes, axisymmetric=axisymmetric, weight=weight,
                            options=options)
