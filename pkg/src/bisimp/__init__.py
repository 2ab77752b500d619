"""Interactive SIMP topology optimization with first-order bilevel solvers."""

from .fea import (
    DensityField,
    GridModel,
    LinearSolveError,
    Material,
    SpectrumEstimate,
    apply_stiffness,
    compliance_energy,
    element_stiffness,
    estimate_rho_max,
    exact_solve,
)
from .filtering import FilterSpec, apply_filter, apply_filter_adjoint, gaussian_weights
from .projection import SimplexBounds, project_box, project_simplex

__all__ = [
    "DensityField",
    "GridModel",
    "LinearSolveError",
    "Material",
    "SpectrumEstimate",
    "apply_stiffness",
    "compliance_energy",
    "element_stiffness",
    "estimate_rho_max",
    "exact_solve",
    "FilterSpec",
    "apply_filter",
    "apply_filter_adjoint",
    "gaussian_weights",
    "SimplexBounds",
    "project_box",
    "project_simplex",
]
