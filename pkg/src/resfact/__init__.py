"""Analytic continuation, factorization and resonances of the transfer
function of a two-channel operator matrix."""

from .contour import AdmissibilityReport, Contour, admissibility, build_contour, estimate_r0
from .factorization import (compute_Omega, eigenprojection_residues, eval_W1, factorization_residual,
                            omega_identities, solve_pair)
from .model import (SchroedingerExampleModel, SeparableAnalyticModel, PhiProfile,
                    build_discretized_full_matrix, eval_density, scalar_model)
from .oracle import RootSearchRegion, find_transfer_zeros, resonance_sweep, schur_identity_check
from .solver import SolveReport, solve_basic_equation, spectrum_H1, verify_contour_independence
from .transfer import eval_M1_continued, eval_M1_physical, eval_V1_operator

__all__ = [
    "AdmissibilityReport", "Contour", "admissibility", "build_contour", "estimate_r0",
    "compute_Omega", "eigenprojection_residues", "eval_W1", "factorization_residual",
    "omega_identities", "solve_pair", "SchroedingerExampleModel", "SeparableAnalyticModel",
    "PhiProfile", "build_discretized_full_matrix", "eval_density", "scalar_model",
    "RootSearchRegion", "find_transfer_zeros", "resonance_sweep", "schur_identity_check",
    "SolveReport", "solve_basic_equation", "spectrum_H1", "verify_contour_independence",
    "eval_M1_continued", "eval_M1_physical", "eval_V1_operator",
]
