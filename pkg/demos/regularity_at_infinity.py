"""Regularity of the point at infinity for the example domains.

Runs the decision cascade on a few domains, the finite-connectedness
check on fingers-prime, and the p-parabolicity trend of the exterior of
a ball in the plane and in space.
"""

from __future__ import annotations

from sphericalize.domains.analysis import (
    finitely_connected_at_boundary,
    p_parabolicity_estimate,
    regularity_at_infinity_verdict,
)
from sphericalize.domains.examples import exterior_ball, fingers_prime, half_plane, staircase, uncountable_rays


def main():
    for name, dom, kw in [
        ("staircase", staircase(5), {"h": 1 / 128}),
        ("half-plane", half_plane(), {}),
        ("uncountable rays", uncountable_rays(4), {"r_max": 64}),
    ]:
        print(f"{name:<18} p=2: {regularity_at_infinity_verdict(dom, 2.0, **kw).verdict}")
    print(f"{'half-plane':<18} p=1.5: {regularity_at_infinity_verdict(half_plane(), 1.5).verdict}")
    fc = finitely_connected_at_boundary(fingers_prime, radii_at_infinity=(2.0,), h=0.5, refinements=1)
    print(f"fingers-prime finitely connected: {fc.finitely_connected} ({fc.reason})")
    for n, ax in [(2, False), (3, True)]:
        rep = p_parabolicity_estimate(exterior_ball(n), None, 2.0, J=4, h=1 / 8,
                                      symmetry_axes=(1,) if ax else (0, 1), axisymmetric=ax)
        energies = ", ".join(f"{e:.3f}" for e in rep.energies)
        print(f"exterior ball n={n}: {rep.verdict} (slope {rep.slope:.2f}; energies {energies})")


if __name__ == "__main__":
    main()
