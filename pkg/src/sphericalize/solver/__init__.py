"""Discrete weighted p-energy minimization on Cartesian grids."""

from .capacity import CapacityResult, condenser_energy, condenser_problem, variational_capacity
from .grid import DIRICHLET, INACTIVE, INTERIOR, GridProblem, ScalarField, build_problem
from .newton import NonConvergenceError, SolveReport, SolverOptions, discrete_energy, solve_dirichlet
from .perron import BoundarySet, barrier, barrier_check, perron_indicator, pharmonic_measure
from .pipeline import (
    AxisymmetricWeight,
    GateError,
    MissingInfinityDataError,
    Transform,
    UnboundedSetup,
    UnboundedSolution,
    prepare_unbounded,
    solve_unbounded,
)

__all__ = [
    "DIRICHLET",
    "INACTIVE",
    "INTERIOR",
    "AxisymmetricWeight",
    "BoundarySet",
    "CapacityResult",
    "GateError",
    "GridProblem",
    "MissingInfinityDataError",
    "NonConvergenceError",
    "ScalarField",
    "SolveReport",
    "SolverOptions",
    "Transform",
    "UnboundedSetup",
    "UnboundedSolution",
    "barrier",
    "barrier_check",
    "build_problem",
    "condenser_energy",
    "condenser_problem",
    "discrete_energy",
    "perron_indicator",
    "pharmonic_measure",
    "prepare_unbounded",
    "solve_dirichlet",
    "solve_unbounded",
    "variational_capacity",
]
