"""Fixed-point solution of ``X = V1(tilde_a1 + X, contour)``."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .contour import AdmissibilityReport, Contour, admissibility
from .errors import NoConvergence, NotAdmissible
from .linalg import eig_general, eig_residuals
from .model import SpectralDensity
from .transfer import check_separation, v1_operator

log = logging.getLogger(__name__)


@dataclass
class SolveReport:
    X: np.ndarray
    H1: np.ndarray
    l: int
    iterations: int
    residual_history: list
    final_residual: float
    contraction_estimate: float
    admissibility: AdmissibilityReport
    norm_X: float
    certificate: float
    certified: bool
    max_iterate_norm: float
    tol: float
    contour: Contour = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "l": self.l,
            "iterations": self.iterations,
            "residual_history": [float(r) for r in self.residual_history],
            "final_residual": self.final_residual,
            "contraction_estimate": self.contraction_estimate,
            "norm_X": self.norm_X,
            "certificate": self.certificate,
            "certified": self.certified,
            "max_iterate_norm": self.max_iterate_norm,
            "tol": self.tol,
            "admissibility": self.admissibility.to_dict(),
            "X": _matrix_json(self.X),
            "H1": _matrix_json(self.H1),
        }


def _matrix_json(M):
    return {"re": M.real.tolist(), "im": M.imag.tolist()}


def _contraction(history, floor):
    ratios = [history[k + 1] / history[k] for k in range(1, len(history) - 1)
              if history[k] > floor and history[k + 1] > floor]
    return float(max(ratios)) if ratios else 0.0


def solve_basic_equation(model: SpectralDensity, contour: Contour, tol: float = 1e-10,
                         max_iter: int = 200, allow_noncertified: bool = False,
                         report: AdmissibilityReport | None = None) -> SolveReport:
    """Picard iteration ``X_{k+1} = V1(tilde_a1 + X_k)`` from ``X_0 = 0``.

    Every iterate is checked to keep its spectrum away from the contour.
    The final iterate is re-checked against a refined quadrature.
    """
    rep = admissibility(model, contour) if report is None else report
    if not rep.admissible:
        if not allow_noncertified:
            raise NotAdmissible(
                f"solvability conditions fail (var_tilde={rep.var_tilde:.4g}, d0={rep.d0:.4g})")
        log.warning("solvability conditions fail; result will not be certified")
    A = model.tilde_a1()
    table = contour.table
    X = np.zeros_like(A)
    history = []
    max_norm = 0.0
    for it in range(1, max_iter + 1):
        Y = A + X
        check_separation(contour, np.linalg.eigvals(Y))
        X_new = v1_operator(table, Y)
        step = float(np.linalg.norm(X_new - X, 2))
        history.append(step)
        X = X_new
        max_norm = max(max_norm, float(np.linalg.norm(X, 2)))
        if step <= tol:
            break
    else:
        raise NoConvergence(f"no convergence in {max_iter} iterations, last step {history[-1]:.3e}")
    H1 = A + X
    check_separation(contour, np.linalg.eigvals(H1))
    fine = contour.refined()
    cert = float(np.linalg.norm(v1_operator(fine.table, H1) - X, 2))
    norm_X = float(np.linalg.norm(X, 2))
    floor = 1e3 * np.finfo(float).eps * max(1.0, norm_X)
    certified = rep.admissible and cert <= 10 * tol
    return SolveReport(X, H1, contour.l, it, history, history[-1], _contraction(history, floor),
                       rep, norm_X, cert, bool(certified), max_norm, tol, contour)


def verify_contour_independence(model, contour_a: Contour, contour_b: Contour, tol: float = 1e-10) -> float:
    """``||X_A - X_B||`` for two contours on the same sheet."""
    if contour_a.l != contour_b.l:
        raise ValueError("contours must lie on the same sheet")
    ra = solve_basic_equation(model, contour_a, tol)
    rb = solve_basic_equation(model, contour_b, tol)
    return float(np.linalg.norm(ra.X - rb.X, 2))


def spectrum_H1(report: SolveReport):
    """Eigenpairs of ``H1`` with per-pair residual ``||H1 v - lambda v||``."""
    w, v = eig_general(report.H1)
    res = eig_residuals(report.H1, w, v)
    order = np.lexsort((w.imag, w.real))
    return [(complex(w[k]), v[:, k], float(res[k])) for k in order]
