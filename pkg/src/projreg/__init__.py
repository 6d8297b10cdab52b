"""Regularization by projection for first-kind integral equations on [0,1].

Collocation, least squares in L^r, and least error in L^p over
discontinuous spline spaces, with a priori, discrepancy-principle and
monotone-error-rule choices of the discretization dimension.
"""

from .operators import CollocationScheme, DiracCombo, Kernel, apply_A, model_rhs
from .rules import choose_n_apriori, choose_n_discrepancy, \
    choose_n_monotone_error, tau_of_c
from .solvers import SolveResult, residual, solve_collocation, \
    solve_least_error, solve_least_squares
from .spaces import SampledFunction, SpaceSpec, bregman_distance, \
    bregman_symmetric, duality_map, duality_map_inverse, lp_norm, sup_norm
from .splines import Mesh, PiecewisePoly, orthonormal_basis, project, refine_nested

__version__ = "0.1.0"

__all__ = [
    "CollocationScheme", "DiracCombo", "Kernel", "Mesh", "PiecewisePoly",
    "SampledFunction", "SolveResult", "SpaceSpec", "apply_A",
    "bregman_distance", "bregman_symmetric", "choose_n_apriori",
    "choose_n_discrepancy", "choose_n_monotone_error", "duality_map",
    "duality_map_inverse", "lp_norm", "model_rhs", "orthonormal_basis",
    "project", "refine_nested", "residual", "solve_collocation",
    "solve_least_error", "solve_least_squares", "sup_norm", "tau_of_c",
]
