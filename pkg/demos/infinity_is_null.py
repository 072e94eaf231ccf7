"""The point at infinity carries no p-harmonic measure when p < n.

Upper Perron envelopes of the indicator of {infinity} on the upper
half-space of R^3 (p = 2) are evaluated at (0, 0, 1) for shrinking
cut-off widths, on the axisymmetric reduction of the inverted domain.
The subcritical barriers are then checked on a grid.
"""

from __future__ import annotations

import argparse

from sphericalize.domains import DomainSpec, HalfSpace
from sphericalize.solver import BoundarySet, Transform, barrier_check, pharmonic_measure, prepare_unbounded


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h", type=float, default=1 / 64)
    args = ap.parse_args(argv)
    setup = prepare_unbounded(DomainSpec(HalfSpace([0, 0, 1], 0)), 2.0, Transform.inversion((0, 0, -0.5)), args.h,
                              axisymmetric=True)
    deltas = [1 / 2, 1 / 4, 1 / 8, 1 / 16, 1 / 32]
    res = pharmonic_measure(setup, BoundarySet.infinity(), [[0, 0, 1.0]], deltas=deltas)
    for d, v in zip(deltas, res.history[:, 0]):
        print(f"delta = {d:<8g} upper envelope at (0,0,1) = {v:.4f}")
    for k in (4, 16, 64):
        rep = barrier_check("subcritical", k, 2.0, 3, h=1 / 8, half_width=1.0)
        print(f"barrier k={k:<3d} passed={rep.passed} min residual={rep.min_residual:.2e} "
              f"axis-only bound excess={rep.literal_decay_max_excess:.3f}")


if __name__ == "__main__":
    main()
