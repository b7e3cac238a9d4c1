"""Bergman-kernel approximations of geodesic rays on toric manifolds.

Weighted Bergman potentials Phi_k, their upper envelope, discrete
Monge-Ampere diagnostics and regularity estimates, computed in log
coordinates for torus-invariant data.
"""
from .errors import BergmanRayError, ConfigError, InvariantViolation, NumericalFailure
from .grid import GridFunction, make_grid
from .toric import LatticeIndex, OrthonormalBasis, Polytope, ToricMetric, build_basis, lattice_points
from .weights import FutakiExpansion, WeightSystem, futaki, traceless_weights, weights

__all__ = [
    "BergmanRayError", "ConfigError", "InvariantViolation", "NumericalFailure",
    "GridFunction", "make_grid", "LatticeIndex", "OrthonormalBasis", "Polytope",
    "ToricMetric", "build_basis", "lattice_points", "FutakiExpansion", "WeightSystem",
    "futaki", "traceless_weights", "weights",
]
