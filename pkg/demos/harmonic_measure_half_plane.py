"""Harmonic measure of [-1, 1] x {0} seen from points of the upper half-plane.

The domain is mapped to a disc by inversion about (0, -1/2); upper Perron
envelopes with shrinking cut-off width are compared with the Poisson
kernel value (arctan((1-x)/y) - arctan((-1-x)/y)) / pi.
"""

from __future__ import annotations

import argparse

import numpy as np

from sphericalize.domains import DomainSpec, HalfSpace
from sphericalize.solver import BoundarySet, Transform, pharmonic_measure, prepare_unbounded


def poisson(P):
    x, y = P[:, 0], P[:, 1]
    return (np.arctan((1 - x) / y) - np.arctan((-1 - x) / y)) / np.pi


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h", type=float, default=1 / 64)
    args = ap.parse_args(argv)
    setup = prepare_unbounded(DomainSpec(HalfSpace([0, 1], 0)), 2.0, Transform.inversion((0, -0.5)), args.h)
    E = BoundarySet(lambda x: np.abs(x[:, 0]) <= 1, False, "[-1,1]x{0}")
    P = np.array([[0, 1.0], [0.5, 0.5], [2, 1], [-3, 2], [0, 5]])
    deltas = [1 / 4, 1 / 8, 1 / 16, 1 / 32]
    res = pharmonic_measure(setup, E, P, deltas=deltas)
    print(f"h = {args.h:g}, {setup.problem.free.size} unknowns")
    print("point        " + "  ".join(f"delta={d:<7g}" for d in deltas) + "  exact")
    for i, pt in enumerate(P):
        label = f"({pt[0]:g}, {pt[1]:g})"
        row = "  ".join(f"{v:<13.4f}" for v in res.history[:, i])
        print(f"{label:<12} {row}  {poisson(P[i:i + 1])[0]:.4f}")


if __name__ == "__main__":
    main()
