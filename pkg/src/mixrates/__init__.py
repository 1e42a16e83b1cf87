"""Penalized EM for finite Gaussian mixtures with refined losses."""

from .em import EmConfig, FitResult, InitStrategy, fit, penalized_objective
from .losses import (
    PolynomialSystemSolutionCandidate,
    RBarTable,
    loss_d,
    loss_dbar,
    loss_wtilde,
    rbar,
    verify_polynomial_system_solution,
)
from .measure import (
    Atom,
    MixingMeasure,
    ParameterSpace,
    VoronoiPartition,
    density,
    sample,
    voronoi_cells,
)
from .transport import CostMatrix, Coupling, solve_ot, wasserstein

__all__ = [
    "Atom",
    "CostMatrix",
    "Coupling",
    "EmConfig",
    "FitResult",
    "InitStrategy",
    "MixingMeasure",
    "ParameterSpace",
    "PolynomialSystemSolutionCandidate",
    "RBarTable",
    "VoronoiPartition",
    "density",
    "fit",
    "loss_d",
    "loss_dbar",
    "loss_wtilde",
    "penalized_objective",
    "rbar",
    "sample",
    "solve_ot",
    "verify_polynomial_system_solution",
    "voronoi_cells",
    "wasserstein",
]

__version__ = "0.1.0"
