"""Example domains with known behaviour at infinity.

Domains made of infinitely many primitives are truncated: only the pieces
that a grid analysis at the requested scale can see are built, and the
truncation is recorded in ``DomainSpec.name``.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .csg import Ball, DomainSpec, HalfSpace, Intersect, Minus, Ray, Segment, Union, Whole, box

__all__ = [
    "half_plane",
    "half_space",
    "exterior_ball",
    "annulus",
    "fingers",
    "fingers_prime",
    "fingers_component_count",
    "uncountable_rays",
    "staircase",
    "slit_plane",
    "punctured_space",
]


def half_space(n: int = 2, offset=0) -> DomainSpec:
    """``{x_n > offset}``."""
    e = [0] * n
    e[-1] = 1
    return DomainSpec(HalfSpace(e, offset), name=f"half-space x{n} > {offset}", feature_size=math.inf)


def half_plane(offset=0) -> DomainSpec:
    return half_space(2, offset)


def exterior_ball(n: int = 2, r=1) -> DomainSpec:
    return DomainSpec(Minus(Whole(n), Ball([0] * n, r)), name=f"exterior of B(0,{r}) in R^{n}")


def annulus(n: int = 2, r=1, R=2) -> DomainSpec:
    return DomainSpec(Minus(Ball([0] * n, R), Ball([0] * n, r)), name=f"annulus {r}<|x|<{R}")


def _quadrant():
    return Intersect(HalfSpace([1, 0], 0), HalfSpace([0, 1], 0))


def fingers(r_max: float = 1024) -> DomainSpec:
    """Open quadrant minus the rays ``x2 = 2^j x1 >= 2^j``.

    Rays starting beyond ``r_max`` are omitted.
    """
    rays = []
    j = 0
    while math.hypot(1, 2**j) <= r_max:
        rays.append(Ray([1, 2**j], [1, 2**j], 0))
        j += 1
    return DomainSpec(Minus(_quadrant(), *rays), name=f"fingers (rays j<{j})", feature_size=1.0)


def fingers_component_count(k: float) -> int:
    """Unbounded components of the fingers domain outside ``closure(B(0,k))``, ``k >= sqrt(2)``.

    The finger between rays j and j+1 is cut off from the strip
    ``0 < x1 < 1`` once its mouth ``{1} x [2^j, 2^(j+1)]`` lies in the ball;
    the wedge below the first ray is cut off once ``(1, 1)`` is.
    """
    if k < math.sqrt(2):
        raise ValueError("the count formula needs k >= sqrt(2)")
    cut = 0
    j = 0
    while math.hypot(1, 2 ** (j + 1)) <= k:
        cut += 1
        j += 1
    return 1 + cut + 1


def fingers_prime(h: float, r_max: float = 1024) -> DomainSpec:
    """Open quadrant minus the rays ``x2 = 2^j x1 >= 1``, resolved at grid scale ``h``.

    The wedge between rays j and j+1 has width about ``R 2^-(j+1)`` at
    distance ``R``; rays up to the first wedge narrower than two cells at
    ``r_max`` are built.  The declared feature size is that far-field
    wedge width; the mouths on ``x2 = 1`` are finer but lie inside every
    ball ``B(0, r)``, ``r > sqrt(2)``, used by analyses at infinity.
    """
    J = int(math.floor(math.log2(r_max / (4 * h))))
    rays = [Ray([Fraction(1, 2**j), 1], [1, 2**j], 0) for j in range(J + 2)]
    return DomainSpec(Minus(_quadrant(), *rays), name=f"fingers' (rays j<={J + 1}, h={h})",
                      feature_size=r_max * 2.0 ** -(J + 1))


def uncountable_rays(depth: int) -> DomainSpec:
    """Upper half-plane minus the rays at angle ``alpha pi`` from radius ``||alpha||``.

    ``alpha`` runs over the binary fractions with at most ``depth`` digits and
    ``||alpha||`` is the position of the last nonzero digit.
    """
    rays = []
    for m in range(1, depth + 1):
        for num in range(1, 2**m, 2):
            ang = math.pi * num / 2**m
            rays.append(Ray([0, 0], [math.cos(ang), math.sin(ang)], m))
    # neighbouring rays are closest where the deepest ones start
    gap = depth * math.sin(math.pi / 2**depth)
    return DomainSpec(Minus(HalfSpace([0, 1], 0), *rays), name=f"uncountable rays (depth {depth})",
                      feature_size=gap)


def staircase(J: int = 5) -> DomainSpec:
    """``(0,1)^2`` joined with the towers ``(2^-j, 2^(1-j)) x (0, 2^j)``, ``j = 1..J``."""
    parts = [box([0, 0], [1, 1])]
    for j in range(1, J + 1):
        parts.append(box([Fraction(1, 2**j), 0], [Fraction(2, 2**j), 2**j]))
    return DomainSpec(Union(*parts), name=f"staircase (J={J})", feature_size=2.0**-J)


def slit_plane(length=1) -> DomainSpec:
    """Plane minus the segment ``{0} x [-length, length]``."""
    return DomainSpec(Minus(Whole(2), Segment([0, 0], [0, 1], -length, length)), name="slit plane",
                      feature_size=math.inf)


def punctured_space(n: int = 2) -> DomainSpec:
    return DomainSpec(Minus(Whole(n), Segment([0] * n, [1] + [0] * (n - 1), 0, 0)), name="punctured space",
                      feature_size=math.inf)
