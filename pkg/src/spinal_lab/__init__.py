"""Spinal graphs: construction, structural validation, volume and Nash-type analysis."""

from __future__ import annotations

__version__ = "0.1.0"

from .analysis import (
    DimensionCertificate,
    ExponentFit,
    NashCurve,
    beta_from_nu,
    certify_dimensions,
    critical_p,
    dim_inequality,
    fit_exponent,
    graph_gradient,
    lemma4_bounds_check,
    lp_norm,
    nash_curve,
    nash_ratio,
    p_lower_bound,
    volume_lower_bound_check,
)
from .generators import (
    PlateSpec,
    VicsekGraph,
    example_spinal_graph,
    lattice_plate,
    plates,
    random_glued,
    vicsek,
)
from .graph import (
    Graph,
    VolumeTable,
    ball,
    ball_intersection_min_ratio,
    build_graph,
    distance,
    measure_doubling,
    volume_table,
)
from .spinal import (
    FiberDecomposition,
    SpinalGraph,
    TestFunction,
    canonical_form,
    check_fiber_geodesics,
    decompose,
    glue,
    spinal_distance,
    spinal_set,
    test_function,
    validate_bruteforce,
    validate_structural,
)
from .walk import ReturnProbSeries, decay_fit, return_probabilities_exact

__all__ = [
    "DimensionCertificate",
    "ExponentFit",
    "FiberDecomposition",
    "Graph",
    "NashCurve",
    "PlateSpec",
    "ReturnProbSeries",
    "SpinalGraph",
    "TestFunction",
    "VicsekGraph",
    "VolumeTable",
    "ball",
    "ball_intersection_min_ratio",
    "beta_from_nu",
    "build_graph",
    "canonical_form",
    "certify_dimensions",
    "check_fiber_geodesics",
    "critical_p",
    "decay_fit",
    "decompose",
    "dim_inequality",
    "distance",
    "example_spinal_graph",
    "fit_exponent",
    "glue",
    "graph_gradient",
    "lattice_plate",
    "lemma4_bounds_check",
    "lp_norm",
    "measure_doubling",
    "nash_curve",
    "nash_ratio",
    "p_lower_bound",
    "plates",
    "random_glued",
    "return_probabilities_exact",
    "spinal_distance",
    "spinal_set",
    "test_function",
    "validate_bruteforce",
    "validate_structural",
    "vicsek",
    "volume_lower_bound_check",
    "volume_table",
]
