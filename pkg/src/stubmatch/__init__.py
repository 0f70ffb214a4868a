"""Two-color stable multi-matching of marked point configurations."""
__version__ = "0.1.0"

from .analysis import (CubeLattice, ComponentReport, UnionFind, adjacent_cube_reach, components,
                       hill_tail_index, renormalize, stub_intensities, total_edge_length)
from .errors import DomainError, MatchingError, SizeError, TieWarning, UnsupportedCase
from .matcher import (Matching, MatchReport, Restriction, brute_force_stable, match_report, run_2cimc,
                      run_greedy, stable_matching, verify_stable)
from .sampling import (Deterministic, Explicit, Geometric, MarkLaw, SimParams, Truncated, Zipf,
                       choose_truncations, law_from_dict, sample_config)
from .schemes import alternating_truncation, finite_component_scheme, percolating_scheme
from .spatial import (Boundary, Color, PointConfig, SpatialIndex, Window, check_non_equidistant,
                      distance, nearest_compatible)

__all__ = [
    "Boundary",
    "Color",
    "ComponentReport",
    "CubeLattice",
    "Deterministic",
    "DomainError",
    "Explicit",
    "Geometric",
    "MarkLaw",
    "MatchReport",
    "Matching",
    "MatchingError",
    "PointConfig",
    "Restriction",
    "SimParams",
    "SizeError",
    "SpatialIndex",
    "TieWarning",
    "Truncated",
    "UnionFind",
    "UnsupportedCase",
    "Window",
    "Zipf",
    "adjacent_cube_reach",
    "alternating_truncation",
    "brute_force_stable",
    "check_non_equidistant",
    "choose_truncations",
    "components",
    "distance",
    "finite_component_scheme",
    "hill_tail_index",
    "law_from_dict",
    "match_report",
    "nearest_compatible",
    "percolating_scheme",
    "renormalize",
    "run_2cimc",
    "run_greedy",
    "sample_config",
    "stable_matching",
    "stub_intensities",
    "total_edge_length",
    "verify_stable",
]
