"""Bergman projections and Toeplitz operators on polygonal domains.

The package solves the Schwarz-Christoffel problem for a simple polygon,
builds Whitney decompositions and the matching quadrature, evaluates the
Bergman kernel through the conformal map, and runs Toeplitz partial sums,
symbol-condition checks and divergence probes.  Exact boundedness
criteria live in :mod:`sctoeplitz.classifier`.
"""

from .classifier import BoundednessVerdict, classify, projection_bounded
from .geometry import Polygon, Square, WhitneyDecomposition, named_polygon, whitney_decompose
from .scmap import ConformalMap, PrevertexConfig, conformal_map, corner_domain

__all__ = [
    "BoundednessVerdict", "ConformalMap", "Polygon", "PrevertexConfig", "Square", "WhitneyDecomposition",
    "classify", "conformal_map", "corner_domain", "named_polygon", "projection_bounded", "whitney_decompose",
]

__version__ = "0.1.0"
