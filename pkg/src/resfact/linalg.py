"""Dense complex matrix helpers shared by every other module.

Operators on the (discretized) channel space are plain 2-D complex numpy
arrays; the functions here add the finiteness checks and the few
factorizations the rest of the package needs.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .errors import EigFailure, InvalidOperand, NotPositiveSemidefinite

TOL_EIG = 1e-10


def as_operator(m) -> np.ndarray:
    """Return `m` as a square complex 2-D array, rejecting NaN/Inf."""
    a = np.atleast_2d(np.asarray(m, dtype=complex))
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidOperand(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidOperand("matrix has non-finite entries")
    return a


def is_hermitian(m, tol: float = 0.0) -> bool:
    a = np.asarray(m)
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol)


def spectral_norm(m) -> float:
    """Largest singular value."""
    a = as_operator(m)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def eig_general(m):
    """Eigenvalues and unit-norm right eigenvectors of a general matrix.

    Returns ``(w, v)`` with ``v[:, k]`` belonging to ``w[k]``.  Defective
    eigenvalues are reported with whatever (nearly parallel) vectors LAPACK
    produces; no Jordan chains are built.
    """
    a = as_operator(m)
    try:
        w, v = sla.eig(a)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigFailure(str(exc)) from exc
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
        raise EigFailure("eigen-solver returned non-finite values")
    v = v / np.linalg.norm(v, axis=0, keepdims=True)
    return w, v


def eig_residuals(m, w, v) -> np.ndarray:
    a = np.asarray(m)
    return np.linalg.norm(a @ v - v * w[None, :], axis=0)


def psd_factor(m, tol_psd: float = 1e-12) -> np.ndarray:
    """Factor a Hermitian positive semidefinite `m` as ``G^* G``.

    `G` has one row per eigenvalue above `tol_psd` (relative to ``||m||``).
    """
    a = as_operator(m)
    if not is_hermitian(a, tol=1e-12 * max(1.0, np.abs(a).max(initial=0.0))):
        raise InvalidOperand("psd_factor needs a Hermitian matrix")
    a = 0.5 * (a + a.conj().T)
    lam, u = np.linalg.eigh(a)
    scale = max(float(np.abs(lam).max(initial=0.0)), np.finfo(float).tiny)
    if lam.size and lam.min() < -tol_psd * scale:
        raise NotPositiveSemidefinite(
            f"smallest eigenvalue {lam.min():.3e} below -{tol_psd:g}*||M||")
    keep = lam > tol_psd * scale
    return (np.sqrt(lam[keep])[:, None] * u[:, keep].conj().T)


def match_multisets(a, b) -> float:
    """Largest pairwise distance of the optimal matching between two
    equal-size sets of complex numbers (``inf`` if the sizes differ)."""
    from scipy.optimize import linear_sum_assignment

    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    if a.size != b.size:
        return float("inf")
    if a.size == 0:
        return 0.0
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())
