"""Domain descriptions and their analysis at infinity."""

from .csg import (
    Ball,
    DomainParseError,
    DomainSpec,
    HalfSpace,
    Intersect,
    Minus,
    Ray,
    Segment,
    Union,
    Whole,
    box,
    load_domain,
    parse_domain,
)
from .analysis import (
    R_MAX,
    ResolutionError,
    components_outside_ball,
    connectivity_at_infinity,
    connectivity_at_point,
    directions_at_infinity,
    finitely_connected_at_boundary,
    mazurkiewicz_distance,
    p_parabolicity_estimate,
    porosity_at_infinity,
    regularity_at_infinity_verdict,
)

__all__ = [
    "Ball",
    "DomainParseError",
    "DomainSpec",
    "HalfSpace",
    "Intersect",
    "Minus",
    "Ray",
    "Segment",
    "Union",
    "Whole",
    "box",
    "load_domain",
    "parse_domain",
    "R_MAX",
    "ResolutionError",
    "components_outside_ball",
    "connectivity_at_infinity",
    "connectivity_at_point",
    "directions_at_infinity",
    "finitely_connected_at_boundary",
    "mazurkiewicz_distance",
    "p_parabolicity_estimate",
    "porosity_at_infinity",
    "regularity_at_infinity_verdict",
]
