"""Minimization of the regularized discrete p-energy.

The energy ``sum w h^n (|grad_h u|^2 + eps^2)^(p/2)`` is strictly convex in
the free nodal values for ``eps > 0``.  It is minimized by damped Newton
steps with a backtracking line search, for a decreasing sequence of
``eps``; the linear (p = 2) minimizer is the starting point.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .grid import GridProblem, ScalarField

__all__ = [
    "SolverOptions",
    "SolveReport",
    "NonConvergenceError",
    "solve_dirichlet",
    "discrete_energy",
    "linear_solve",
]

log = logging.getLogger(__name__)

DEFAULT_EPS = tuple(10.0 ** (-k) for k in range(2, 11))


@dataclass
class SolverOptions:
    """Knobs of :func:`solve_dirichlet`.

    ``grad_tol`` bounds the max-norm of the energy gradient over the free
    nodes divided by ``h^n`` (a discrete PDE residual) at the last stage;
    earlier stages stop at ``stage_tol``.
    """

    eps_schedule: tuple = DEFAULT_EPS
    grad_tol: float = 1e-8
    stage_tol: float = 1e-6
    max_iters: int = 500
    direct_limit: int = 60000
    direct_limit_3d: int = 8000
    cg_rtol: float = 1e-12
    armijo: float = 1e-4


@dataclass
class SolveReport:
    energy: float
    iters: int
    grad_norm: float
    eps_schedule: list
    min: float
    max: float
    converged: bool = True
    energies: list = field(default_factory=list)
    stage_iters: list = field(default_factory=list)
    seconds: float = 0.0
    comparison_ok: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


class NonConvergenceError(RuntimeError):
    """Raised with the partial :class:`SolveReport` attached as ``.report``."""

    def __init__(self, msg, report: SolveReport):
        super().__init__(msg)
        self.report = report


def discrete_energy(prob: GridProblem, u: ScalarField | np.ndarray, eps: float = 0.0) -> float:
    vals = u.values if isinstance(u, ScalarField) else np.asarray(u, dtype=float)
    if vals.size != prob.size or not np.all(np.isfinite(vals[prob.kind.reshape(-1) != 0])):
        raise ValueError("field must be defined and finite on all active nodes")
    return prob.energy(vals, eps)


class _LinearSolver:
    """Sparse SPD solves: direct for small systems, AMG-preconditioned CG otherwise."""

    def __init__(self, opts: SolverOptions, ndim: int = 2):
        self.opts = opts
        self.ndim = ndim
        self.ml = None
        self.uses = 0

    def __call__(self, A: sparse.csr_matrix, b: np.ndarray, fresh: bool = False) -> np.ndarray:
        if A.shape[0] == 0:
            return np.zeros(0)
        limit = self.opts.direct_limit if self.ndim <= 2 else self.opts.direct_limit_3d
        if A.shape[0] <= limit:
            return spla.spsolve(A.tocsc(), b)
        import pyamg

        if self.ml is None or fresh or self.uses >= 4:
            self.ml = pyamg.smoothed_aggregation_solver(A, symmetry="symmetric", max_coarse=2000)
            self.uses = 0
        self.uses += 1
        M = self.ml.aspreconditioner(cycle="V")
        bn = np.linalg.norm(b)
        if bn == 0:
            return np.zeros_like(b)
        x, info = spla.cg(A, b, rtol=self.opts.cg_rtol, atol=0.0, maxiter=400, M=M)
        if info > 0:
            # stale hierarchy: rebuild once
            self.ml = pyamg.smoothed_aggregation_solver(A, symmetry="symmetric", max_coarse=2000)
            self.uses = 1
            M = self.ml.aspreconditioner(cycle="V")
            x, info = spla.cg(A, b, x0=x, rtol=self.opts.cg_rtol, atol=0.0, maxiter=800, M=M)
        return x


def linear_solve(A, b, opts: SolverOptions | None = None) -> np.ndarray:
    return _LinearSolver(opts or SolverOptions())(A, b, fresh=True)


def _grad_norm(prob: GridProblem, g_full: np.ndarray) -> float:
    gf = g_full[prob.free]
    if gf.size == 0:
        return 0.0
    return float(np.max(np.abs(gf))) / prob.h**prob.n


def solve_dirichlet(prob: GridProblem, opts: SolverOptions | None = None, u0: np.ndarray | None = None):
    """Minimize the discrete p-energy with the problem's boundary data.

    Parameters
    ----------
    prob : GridProblem
    opts : SolverOptions, optional
    u0 : ndarray, optional
        Starting nodal vector; the p = 2 minimizer is used if omitted.

    Returns
    -------
    (ScalarField, SolveReport)

    Raises
    ------
    NonConvergenceError
        If a stage exhausts ``max_iters`` Newton steps.
    """
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    lin = _LinearSolver(opts, prob.n)
    ub = prob.boundary_vector()
    if u0 is None:
        # exact p = 2 minimizer: H d = -g at u = boundary extension by zero
        g = prob.with_p(2.0).gradient(ub, 0.0)
        if prob.free.size:
            H2 = prob.hessian(ub, 0.0, p=2.0)
            ub[prob.free] = lin(H2, -g[prob.free], fresh=True)
        u = ub
    else:
        u = np.asarray(u0, dtype=float).copy()
        u[prob.dirichlet] = ub[prob.dirichlet]
    energies = []
    stage_iters = []
    consumed = []
    total = 0
    gn = math.inf
    schedule = list(opts.eps_schedule)
    for si, eps in enumerate(schedule):
        last = si == len(schedule) - 1
        tol = opts.grad_tol if last else max(opts.stage_tol, opts.grad_tol)
        g = prob.gradient(u, eps)
        gn = _grad_norm(prob, g)
        E = prob.energy(u, eps)
        consumed.append(eps)
        its = 0
        fresh = True
        while gn > tol:
            if its >= opts.max_iters:
                rep = SolveReport(prob.energy(u), total, gn, consumed, float(np.min(u[prob.kind.reshape(-1) != 0])),
                                  float(np.max(u[prob.kind.reshape(-1) != 0])), False, energies, stage_iters,
                                  time.perf_counter() - t0)
                raise NonConvergenceError(f"no convergence at eps={eps:g} after {its} iterations", rep)
            H = prob.hessian(u, eps)
            gf = g[prob.free]
            d = lin(H, -gf, fresh=fresh)
            fresh = False
            slope = float(gf @ d)
            if not np.all(np.isfinite(d)) or slope >= 0:
                diag = H.diagonal()
                d = -gf / np.where(diag > 0, diag, 1.0)
                slope = float(gf @ d)
            t = 1.0
            accepted = False
            while t > 1e-12:
                trial = u.copy()
                trial[prob.free] += t * d
                Et = prob.energy(trial, eps)
                if Et <= E + opts.armijo * t * slope:
                    accepted = True
                    break
                if Et - E <= 1e-14 * abs(E):
                    # at roundoff level: accept if the gradient improves
                    gt = prob.gradient(trial, eps)
                    if _grad_norm(prob, gt) < gn:
                        accepted = True
                        break
                t *= 0.5
            its += 1
            total += 1
            if not accepted:
                rep = SolveReport(prob.energy(u), total, gn, consumed, float(np.min(u)), float(np.max(u)), False,
                                  energies, stage_iters, time.perf_counter() - t0)
                raise NonConvergenceError(f"line search failed at eps={eps:g}", rep)
            u = trial
            E = Et
            energies.append(E)
            g = prob.gradient(u, eps)
            gn = _grad_norm(prob, g)
            log.debug("eps=%g it=%d E=%.15g |g|=%.3e t=%g", eps, its, E, gn, t)
        stage_iters.append(its)
    act = prob.kind.reshape(-1) != 0
    lo, hi = prob.data_bounds()
    umin, umax = float(np.min(u[act])), float(np.max(u[act]))
    slack = 1e-9 * max(1.0, abs(lo), abs(hi))
    rep = SolveReport(
        energy=prob.energy(u, 0.0),
        iters=total,
        grad_norm=gn,
        eps_schedule=consumed,
        min=umin,
        max=umax,
        converged=True,
        energies=energies,
        stage_iters=stage_iters,
        seconds=time.perf_counter() - t0,
        comparison_ok=bool(umin >= lo - slack and umax <= hi + slack),
    )
    return ScalarField(prob, u), rep
