"""Ultra-weak DPG discretization of 1D fractional advection-diffusion.

Solves -D^alpha u + b u' + c u = f on (0, 1), u(0) = u(1) = 0, with the
Riemann-Liouville derivative of order alpha in (1, 2), through the
first-order system sigma = u', -(D^{alpha-2} sigma)' + b sigma + c u = f.
"""
from .assembly import (ProblemData, SplitMatrix, SystemMatrices, TestLayout, TrialLayout,
                       assemble_B, assemble_load, assemble_system, assemble_theta)
from .experiments import (ConvergenceRecord, ExactBundle, SolverFailure, error_norms, example1,
                          example2, example3, fit_eoc, run_convergence)
from .fractional import (FractionalOrder, coupling_matrix, frac_coupling_entry, rl_left_apply,
                         rl_left_monomial, rl_right_apply)
from .meshing import MarkedSet, Mesh, MeshError, doerfler_mark, refine, uniform_mesh
from .polyquad import EndpointSingular, PiecewisePolynomial, gauss_jacobi, gauss_legendre
from .solver import DpgSolution, InfSupError, estimate, factor_theta, solve, solve_normal_equations

__version__ = "0.1.0"

__all__ = [
    "ProblemData", "SplitMatrix", "SystemMatrices", "TestLayout", "TrialLayout",
    "assemble_B", "assemble_load", "assemble_system", "assemble_theta",
    "ConvergenceRecord", "ExactBundle", "SolverFailure", "error_norms", "example1", "example2",
    "example3", "fit_eoc", "run_convergence",
    "FractionalOrder", "coupling_matrix", "frac_coupling_entry", "rl_left_apply",
    "rl_left_monomial", "rl_right_apply",
    "MarkedSet", "Mesh", "MeshError", "doerfler_mark", "refine", "uniform_mesh",
    "EndpointSingular", "PiecewisePolynomial", "gauss_jacobi", "gauss_legendre",
    "DpgSolution", "InfSupError", "estimate", "factor_theta", "solve", "solve_normal_equations",
]
