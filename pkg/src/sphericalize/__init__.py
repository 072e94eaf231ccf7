"""Weighted p-energy tools for unbounded Euclidean domains.

Unbounded problems are turned into bounded weighted ones by
sphericalization or spherical inversion, then solved by discrete energy
minimization.
"""

from .geometry import (
    INFINITY,
    DimensionError,
    SphericalizationContext,
    arc_length_density,
    d_a,
    dhat_bounds,
    dhat_chain_upper,
)

__version__ = "0.1.0"

__all__ = [
    "INFINITY",
    "DimensionError",
    "SphericalizationContext",
    "arc_length_density",
    "d_a",
    "dhat_bounds",
    "dhat_chain_upper",
]
