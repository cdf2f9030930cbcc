"""Nonlinear squeezing transfer through Gaussian cluster-state teleportation.

Analytic (moment) and truncated-Fock simulations of canonical, nonlinear-
feedforward and ideal-cubic-projection schemes, plus the optimiser and batch
runner used to produce sweep data.
"""

from .gaussian import ClusterParams, CovarianceState, build_cluster, squeezing_db
from .metrics import gaussian_min_variance, native_cubicity, xi_from_moments
from .moments import SchemeConfig, output_moments

__all__ = [
    "ClusterParams",
    "CovarianceState",
    "SchemeConfig",
    "build_cluster",
    "gaussian_min_variance",
    "native_cubicity",
    "output_moments",
    "squeezing_db",
    "xi_from_moments",
]

__version__ = "0.1.0"
