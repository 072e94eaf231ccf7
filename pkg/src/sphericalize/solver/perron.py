"""Perron envelopes for indicator data, p-harmonic measure and barrier checks.

The upper Perron solution of the indicator of ``E`` is approached by
solutions with continuous data ``f_delta = max(0, 1 - dist(., E)/delta)``,
which decrease as ``delta`` decreases.  Distances are measured in the
computational frame between boundary samples placed on the grid edges that
cross the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .grid import DIRICHLET, INTERIOR, ScalarField, build_problem, coupling_offsets
from .newton import SolverOptions, solve_dirichlet
from .pipeline import UnboundedSetup

__all__ = [
    "BoundarySet",
    "BoundarySamples",
    "PerronResult",
    "boundary_samples",
    "envelope_data",
    "perron_indicator",
    "pharmonic_measure",
    "barrier",
    "BarrierReport",
    "barrier_check",
]


@dataclass(frozen=True)
class BoundarySet:
    """A subset ``E`` of the boundary of the domain, possibly containing infinity.

    ``predicate`` receives original-frame boundary points (array (m, n))
    and returns a boolean array.
    """

    predicate: Callable
    includes_infinity: bool = False
    label: str = "E"

    def complement(self) -> "BoundarySet":
        pred = self.predicate
        return BoundarySet(lambda x: ~np.asarray(pred(x), dtype=bool), not self.includes_infinity,
                           f"complement({self.label})")

    @classmethod
    def everything(cls):
        return cls(lambda x: np.ones(len(x), dtype=bool), True, "all")

    @classmethod
    def empty(cls):
        return cls(lambda x: np.zeros(len(x), dtype=bool), False, "empty")

    @classmethod
    def infinity(cls):
        return cls(lambda x: np.zeros(len(x), dtype=bool), True, "infinity")


@dataclass
class BoundarySamples:
    """Points on the computational boundary with their original-frame preimages."""

    y: np.ndarray
    x: np.ndarray
    is_inf: np.ndarray
    owner: np.ndarray  # nearest-sample index for each Dirichlet node

    def labels(self, E: BoundarySet) -> np.ndarray:
        lab = np.zeros(len(self.y), dtype=bool)
        fin = ~self.is_inf
        if np.any(fin):
            lab[fin] = np.asarray(E.predicate(self.x[fin]), dtype=bool)
        lab[self.is_inf] = E.includes_infinity
        return lab


def boundary_samples(setup: UnboundedSetup, bisection_steps: int = 40) -> BoundarySamples:
    """Boundary crossings on edges from free nodes to Dirichlet nodes.

    Dirichlet nodes that lie inside the computational domain (nodes
    standing for infinity) are their own samples.
    """
    prob = setup.problem
    shape = np.array(prob.shape)
    d_nodes = prob.dirichlet
    yd = prob.coords(d_nodes)
    inside_d = setup.inside_grid(yd)
    inf_mask = np.isin(d_nodes, setup.infinity_nodes)
    self_sample = inside_d | inf_mask
    ys, xs, infs = [], [], []
    if np.any(self_sample):
        x, is_inf = setup.pulled_back(d_nodes[self_sample])
        ys.append(yd[self_sample])
        xs.append(x)
        infs.append(is_inf)
    kind = prob.kind.reshape(-1)
    pairs_i, pairs_j = [], []
    todo = d_nodes[~self_sample]
    idx = np.stack(np.unravel_index(todo, prob.shape), axis=1)
    for off in coupling_offsets(prob.n):
        nb = idx + np.array(off)
        ok = np.all((nb >= 0) & (nb < shape), axis=1)
        flat = np.full(len(todo), -1, dtype=np.int64)
        flat[ok] = np.ravel_multi_index(tuple(nb[ok].T), prob.shape)
        good = ok.copy()
        good[ok] = kind[flat[ok]] == INTERIOR
        pairs_i.append(flat[good])
        pairs_j.append(todo[good])
    if pairs_i:
        pi = np.concatenate(pairs_i)
        pj = np.concatenate(pairs_j)
        a = prob.coords(pi)
        b = prob.coords(pj)
        lo = np.zeros(len(pi))
        hi = np.ones(len(pi))
        for _ in range(bisection_steps):
            mid = 0.5 * (lo + hi)
            inside = setup.inside_grid(a + mid[:, None] * (b - a))
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        s = a + hi[:, None] * (b - a)
        ys.append(s)
        xs.append(setup.from_grid(s))
        infs.append(np.zeros(len(s), dtype=bool))
    y = np.concatenate(ys) if ys else np.zeros((0, prob.n))
    x = np.concatenate(xs) if xs else np.zeros((0, setup.domain.n))
    is_inf = np.concatenate(infs) if infs else np.zeros(0, dtype=bool)
    owner = np.zeros(len(d_nodes), dtype=np.int64)
    if len(y):
        _, owner = cKDTree(y).query(yd)
    return BoundarySamples(y, x, is_inf, np.asarray(owner, dtype=np.int64))


def envelope_data(setup: UnboundedSetup, samples: BoundarySamples, E: BoundarySet, delta: float) -> np.ndarray:
    """Dirichlet values ``max(0, 1 - dist(s_j, E)/delta)`` at the nearest sample ``s_j``."""
    prob = setup.problem
    lab = samples.labels(E)
    data = np.zeros(prob.size)
    if not np.any(lab):
        return data
    dist, _ = cKDTree(samples.y[lab]).query(samples.y[samples.owner])
    data[prob.dirichlet] = np.maximum(0.0, 1.0 - dist / delta)
    return data


@dataclass
class PerronResult:
    field: ScalarField
    side: str
    deltas: list
    monotone: bool
    max_violation: float
    last_decrement: float
    certified: bool
    fields: list = field(default_factory=list)
    reports: list = field(default_factory=list)

    def __call__(self, x):
        return self.field(x)


def _upper_envelopes(setup, samples, E, deltas, options, tol):
    fields, reports = [], []
    prev = None
    worst = 0.0
    for d in deltas:
        prob = setup.problem.with_data(envelope_data(setup, samples, E, d))
        f, rep = solve_dirichlet(prob, options)
        if prev is not None:
            worst = max(worst, float(np.max(f.values - prev.values)))
        fields.append(f)
        reports.append(rep)
        prev = f
    return fields, reports, worst


def perron_indicator(
    setup: UnboundedSetup,
    E: BoundarySet,
    side: str = "upper",
    deltas: Sequence[float] = (),
    options: SolverOptions | None = None,
    samples: BoundarySamples | None = None,
    monotonicity_tol: float = 1e-6,
) -> PerronResult:
    """Envelope estimate of the upper or lower Perron solution of ``chi_E``.

    ``deltas`` must be decreasing.  For the upper side the solutions must
    decrease with ``delta`` (checked nodewise up to ``monotonicity_tol``);
    the lower side is ``1 - upper(complement of E)``.
    """
    if side not in ("upper", "lower"):
        raise ValueError("side must be 'upper' or 'lower'")
    deltas = list(deltas) or [8 * setup.problem.h, 4 * setup.problem.h, 2 * setup.problem.h]
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be strictly decreasing")
    samples = samples or boundary_samples(setup)
    target = E if side == "upper" else E.complement()
    fields, reports, worst = _upper_envelopes(setup, samples, target, deltas, options, monotonicity_tol)
    last = fields[-1]
    act = setup.problem.kind.reshape(-1) == INTERIOR
    dec = float(np.max(np.abs(fields[-2].values - last.values)[act], initial=0.0)) if len(fields) > 1 else math.nan
    if side == "lower":
        fields = [ScalarField(f.problem, 1.0 - f.values) for f in fields]
        last = fields[-1]
    lab = samples.labels(E)
    finite_hits = int(np.sum(lab & ~samples.is_inf))
    certified = finite_hits >= 2 and int(np.sum(~lab & ~samples.is_inf)) >= 2
    return PerronResult(last, side, deltas, worst <= monotonicity_tol, worst, dec, certified, fields, reports)


@dataclass
class HarmonicMeasureResult:
    """Values at the evaluation points, one row per ``delta`` in ``history``."""

    values: np.ndarray
    perron: PerronResult
    within_bounds: bool
    history: np.ndarray = None

    @property
    def last_decrement(self) -> np.ndarray:
        if self.history is None or len(self.history) < 2:
            return np.full(len(self.values), math.nan)
        return self.history[-2] - self.history[-1]


def pharmonic_measure(setup: UnboundedSetup, E: BoundarySet, eval_points, deltas: Sequence[float] = (),
                      options: SolverOptions | None = None, tol: float = 1e-7) -> HarmonicMeasureResult:
    """Upper Perron envelope of ``chi_E`` evaluated at original-frame points."""
    res = perron_indicator(setup, E, "upper", deltas, options)
    pts = np.atleast_2d(np.asarray(eval_points, dtype=float))
    y = setup.to_grid(pts)
    hist = np.array([f(y) for f in res.fields])
    vals = hist[-1]
    ok = bool(np.all(vals >= -tol) and np.all(vals <= 1 + tol))
    return HarmonicMeasureResult(vals, res, ok, hist)


def barrier(formula: str, k: float, p: float, n: int) -> Callable:
    """The functions ``u_k`` on the upper half-space.

    ``subcritical`` (p < n): ``1 - (|x - (0,..,0,-k)|/k)^beta``;
    ``supercritical`` (p > n): ``|x|^beta / k``;
    ``critical`` (p = n): ``log(|x - (0,..,0,-k)|/k)``; ``beta = (p-n)/(p-1)``.
    """
    expected = "subcritical" if p < n else ("critical" if p == n else "supercritical")
    if formula != expected:
        raise ValueError(f"formula {formula!r} does not match p={p}, n={n} (expected {expected!r})")
    beta = (p - n) / (p - 1)
    pole = np.zeros(n)
    pole[-1] = -k

    def u(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if formula == "supercritical":
            return np.linalg.norm(x, axis=1) ** beta / k
        r = np.linalg.norm(x - pole, axis=1) / k
        if formula == "critical":
            return np.log(r)
        return 1.0 - r**beta

    return u


@dataclass
class BarrierReport:
    formula: str
    k: float
    p: float
    n: int
    h: float
    min_residual: float
    residual_ok: bool
    infinity_values: list
    infinity_ok: bool
    boundary_min: float
    boundary_ok: bool
    decay_ok: bool
    decay_max_excess: float
    literal_decay_max_excess: float

    @property
    def passed(self) -> bool:
        return self.residual_ok and self.infinity_ok and self.boundary_ok and self.decay_ok

    def to_dict(self):
        from dataclasses import asdict

        d = asdict(self)
        d["passed"] = self.passed
        return d


def barrier_check(formula: str, k: float, p: float, n: int, h: float = 1 / 16, half_width: float = 2.0,
                  residual_tol: float = 1.0, seed: int = 0) -> BarrierReport:
    """Check the barrier ``u_k`` on a grid of the upper half-space.

    (a) the discrete p-Laplacian residual (energy derivative over
    ``p h^n``) is at least ``-residual_tol * h`` at every interior node of
    the box ``[-L, L]^(n-1) x (0, L]``;
    (b) ``u_k >= 0`` on sampled points of the boundary hyperplane and
    ``u_k`` increases along rays to a value ``>= 1 - 1e-3`` at distance
    ``1e8 k``;
    (c) for the subcritical formula, the decay bound
    ``u_k(x) <= 1 - ((|x| + k)/k)^beta``, which tends to 0 as ``k`` grows.
    The excess over the bound ``1 - ((x_n + k)/k)^beta`` is also reported;
    that bound holds on the axis only.
    """
    u = barrier(formula, k, p, n)
    beta = (p - n) / (p - 1)
    L = half_width
    m = int(round(L / h))
    shape = (2 * m + 1,) * (n - 1) + (m + 1,)
    lo = np.array([-L] * (n - 1) + [0.0])
    idx = np.indices(shape).reshape(n, -1).T
    X = lo + h * idx
    interior = (X[:, -1] > 0).reshape(shape)
    prob = build_problem(interior, lo, h, p, u, check_floating=False)
    vals = prob.boundary_vector()
    vals[prob.free] = u(prob.coords(prob.free))
    res = prob.residual(vals)[prob.free]
    # nodes whose stencil neighbourhood stays inside the box
    fidx = np.stack(np.unravel_index(prob.free, shape), axis=1)
    deep = np.all((fidx >= 1) & (fidx <= np.array(shape) - 2), axis=1)
    min_res = float(np.min(res[deep])) if np.any(deep) else 0.0
    residual_ok = min_res >= -residual_tol * h
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((64, n))
    dirs[:, -1] = np.abs(dirs[:, -1])
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = k * 10.0 ** np.arange(0, 9)
    mins = [float(np.min(u(R * dirs))) for R in radii]
    inc = all(b >= a - 1e-12 for a, b in zip(mins, mins[1:]))
    infinity_ok = inc and mins[-1] >= 1 - 1e-3
    plane = rng.uniform(-1, 1, (2000, n)) * np.concatenate([10.0 ** rng.uniform(-3, 8, (2000, 1))] * n, axis=1)
    plane[:, -1] = 0.0
    bvals = u(np.vstack([plane, X[X[:, -1] == 0]]))
    bmin = float(np.min(bvals))
    boundary_ok = bmin >= -1e-12
    if formula == "subcritical":
        pts = X[X[:, -1] > 0]
        uk = u(pts)
        bound = 1 - ((np.linalg.norm(pts, axis=1) + k) / k) ** beta
        literal = 1 - ((pts[:, -1] + k) / k) ** beta
        excess = float(np.max(uk - bound))
        lit = float(np.max(uk - literal))
        decay_ok = excess <= 1e-12
    else:
        excess, lit, decay_ok = 0.0, 0.0, True
    return BarrierReport(formula, k, p, n, h, min_res, bool(residual_ok), mins, bool(infinity_ok), bmin,
                         bool(boundary_ok), bool(decay_ok), excess, lit)
