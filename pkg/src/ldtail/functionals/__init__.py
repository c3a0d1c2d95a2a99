"""Hypercube functionals with certified derivative bounds."""

from .ap3 import AP3, ap3_pair_row
from .base import (
    CirculantPairBound,
    DensePairBound,
    EdgePairBound,
    PairBound,
    SmoothFunctional,
    SparsePairBound,
    TiltedPairBound,
    UniformPairBound,
    ZeroPairBound,
    all_binary_states,
    discrete_derivative,
)
from .graphs import EdgeVector, Ergm, ErgmSpec, GraphSpec, HomDensity, edge_matrix, vertex_count
from .tilted import TiltedHamiltonian, smooth_step, smooth_step_prime, smooth_step_second
from .toys import Chain, CurieWeiss, Linear, LinearShift, TableFunctional

__all__ = [
    "AP3",
    "Chain",
    "CirculantPairBound",
    "CurieWeiss",
    "DensePairBound",
    "EdgePairBound",
    "EdgeVector",
    "Ergm",
    "ErgmSpec",
    "GraphSpec",
    "HomDensity",
    "Linear",
    "LinearShift",
    "PairBound",
    "SmoothFunctional",
    "SparsePairBound",
    "TableFunctional",
    "TiltedHamiltonian",
    "TiltedPairBound",
    "UniformPairBound",
    "ZeroPairBound",
    "all_binary_states",
    "ap3_pair_row",
    "discrete_derivative",
    "edge_matrix",
    "smooth_step",
    "smooth_step_prime",
    "smooth_step_second",
    "vertex_count",
]
