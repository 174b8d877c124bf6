"""Transfer function on the physical sheet, its continuation through the
cut, and the operator-argument integral ``V1(Y, contour)``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .contour import Contour, NodeTable, real_axis_table
from .errors import NearContour, OnSpectralCut, SpectrumMeetsContour
from .model import SpectralDensity


@dataclass
class TransferEvaluation:
    z: complex
    value: np.ndarray
    sheet: str
    quadrature_residual: float


@lru_cache(maxsize=32)
def _physical_table(model, upper: float) -> NodeTable:
    return real_axis_table(model, upper)


PANEL_WIDTH = 0.05


def _graded_edges(x0: float, d: float, width: float) -> np.ndarray:
    """Panel edges graded geometrically towards ``x0`` down to size ``d``."""
    steps = d * 2.0 ** np.arange(0, max(1, math.ceil(math.log2(width / d))) + 1)
    return np.concatenate([x0 - steps, [x0], x0 + steps])


def physical_table_for(model: SpectralDensity, z: complex) -> NodeTable:
    top = max(float(model.spectrum_tilde_a1.max()), z.real, model.alpha0)
    upper = math.ceil(top) + 2.0
    d = abs(z.imag)
    if z.real > model.alpha0 - d and d < 4 * PANEL_WIDTH:
        # a pole this close to the cut needs panels no wider than its distance
        return real_axis_table(model, upper, PANEL_WIDTH,
                               extra_edges=_graded_edges(z.real, max(d, 1e-12), 4 * PANEL_WIDTH))
    # round so nearby points share a rule
    return _physical_table(model, upper)


def m1_from_table(model, table: NodeTable, z: complex) -> np.ndarray:
    coeff = table.weights * (z / (z - table.nodes))
    n = model.dim
    return model.tilde_a1() - z * np.eye(n) + table.weighted_sum(coeff)


def eval_M1_physical(model: SpectralDensity, z: complex) -> TransferEvaluation:
    """``tilde_a1 - z + int_{Delta0} K'(mu) z/(z-mu) dmu`` by real-axis
    quadrature (up to the model cutoff)."""
    z = complex(z)
    if z.imag == 0 and z.real >= model.alpha0:
        raise OnSpectralCut(f"z={z} lies on the spectral interval")
    table = physical_table_for(model, z)
    value = m1_from_table(model, table, z)
    lam = model.cutoff
    resid = model.tail_bound(lam) * abs(z) * (1 + lam) / max(abs(z - lam), 1e-300)
    return TransferEvaluation(z, value, "physical", float(resid))


def eval_M1_continued(model: SpectralDensity, contour: Contour, z: complex,
                      check: bool = True) -> TransferEvaluation:
    """Continuation ``M1(z, contour)``, holomorphic off the path."""
    z = complex(z)
    if check and contour.too_close(z):
        raise NearContour(f"z={z} is within the quadrature margin of the contour")
    value = m1_from_table(model, contour.table, z)
    return TransferEvaluation(z, value, f"continued({contour.l:+d})", contour.tol_quad)


def m1_continued(model, contour, z) -> np.ndarray:
    return m1_from_table(model, contour.table, complex(z))


# ---------------------------------------------------------------------------
# resolvents at the nodes


def check_separation(contour: Contour, spectrum) -> float:
    """Smallest node distance to `spectrum`; raises if inside the margin."""
    spectrum = np.atleast_1d(np.asarray(spectrum, dtype=complex))
    d = np.abs(contour.nodes[:, None] - spectrum[None, :])
    j, k = np.unravel_index(np.argmin(d), d.shape)
    if d[j, k] < 10.0 * contour.spacing[j]:
        raise SpectrumMeetsContour(
            f"eigenvalue {spectrum[k]:.6g} is {d[j, k]:.3e} from the contour")
    return float(d.min())


def _decoupled_support(H: np.ndarray, mask) -> np.ndarray | None:
    """Indices of `mask` if they form an invariant block of ``H`` that is
    a proper subset, else ``None``."""
    if mask.all():
        return None
    S = np.flatnonzero(mask)
    rest = np.flatnonzero(~mask)
    if np.any(H[np.ix_(S, rest)]) or np.any(H[np.ix_(rest, S)]):
        return None
    return S


def row_resolvents(H: np.ndarray, nodes, R) -> np.ndarray:
    """``R_j (H - mu_j)^{-1}`` for every node, shape ``(J, r, n)``."""
    J, r, n = R.shape
    if J == 0:
        return np.empty((J, r, n), dtype=complex)
    S = _decoupled_support(H, np.any(R != 0, axis=(0, 1)))
    if S is not None:
        out = np.zeros((J, r, n), dtype=complex)
        out[:, :, S] = row_resolvents(H[np.ix_(S, S)], nodes, R[:, :, S])
        return out
    out = np.empty((J, r, n), dtype=complex)
    if n <= 24:
        A = H[None, :, :] - nodes[:, None, None] * np.eye(n)[None]
        # x A = R  <=>  A^T x^T = R^T
        out[:] = np.linalg.solve(A.transpose(0, 2, 1), R.transpose(0, 2, 1)).transpose(0, 2, 1)
        return out
    T, Q = sla.schur(H, output="complex")
    RQ = R @ Q
    Tt = T.T
    eye = np.eye(n)
    for j in range(J):
        y = sla.solve_triangular(Tt - nodes[j] * eye, RQ[j].T, lower=True, check_finite=False)
        out[j] = y.T
    return out @ Q.conj().T


def column_resolvents(H: np.ndarray, nodes, L) -> np.ndarray:
    """``(H - mu_j)^{-1} L_j`` for every node, shape ``(J, n, r)``."""
    J, n, r = L.shape
    if J == 0:
        return np.empty((J, n, r), dtype=complex)
    S = _decoupled_support(H, np.any(L != 0, axis=(0, 2)))
    if S is not None:
        out = np.zeros((J, n, r), dtype=complex)
        out[:, S, :] = column_resolvents(H[np.ix_(S, S)], nodes, L[:, S, :])
        return out
    out = np.empty((J, n, r), dtype=complex)
    if n <= 24:
        A = H[None, :, :] - nodes[:, None, None] * np.eye(n)[None]
        out[:] = np.linalg.solve(A, L)
        return out
    T, Q = sla.schur(H, output="complex")
    QL = Q.conj().T[None] @ L
    eye = np.eye(n)
    for j in range(J):
        out[j] = sla.solve_triangular(T - nodes[j] * eye, QL[j], lower=False, check_finite=False)
    return Q[None] @ out


def _sum_lr(table: NodeTable, coeff, left, right) -> np.ndarray:
    """``sum_j coeff_j left_j @ right_j`` for stacks ``(J,n,r)``, ``(J,r,n)``."""
    J, n, r = left.shape
    lf = (left * coeff[:, None, None]).transpose(1, 0, 2).reshape(n, J * r)
    return lf @ right.reshape(J * r, right.shape[2])


def eval_V1_operator(model: SpectralDensity, contour: Contour, Y, check: bool = True) -> np.ndarray:
    """``int_Gamma K'(mu) Y (Y - mu)^{-1} dmu``."""
    Y = np.asarray(Y, dtype=complex)
    if check:
        check_separation(contour, np.linalg.eigvals(Y))
    return v1_operator(contour.table, Y)


def v1_operator(table: NodeTable, Y) -> np.ndarray:
    # Y (Y - mu)^{-1} = I + mu (Y - mu)^{-1}
    S = row_resolvents(Y, table.nodes, table.R)
    plain = table.weighted_sum(table.weights)
    return plain + _sum_lr(table, table.weights * table.nodes, table.L, S)


def v1_norm_bound(model: SpectralDensity, contour: Contour, Y) -> float:
    """Right-hand side of the a-priori estimate
    ``Var_1 ||Y|| sup_mu (1+|mu|) ||(Y-mu)^{-1}||``."""
    from .contour import var1_on_contour

    Y = np.asarray(Y, dtype=complex)
    n = Y.shape[0]
    sup = 0.0
    for mu in contour.nodes:
        s_min = np.linalg.svd(Y - mu * np.eye(n), compute_uv=False)[-1]
        sup = max(sup, (1 + abs(mu)) / s_min)
    return var1_on_contour(model, contour) * float(np.linalg.norm(Y, 2)) * sup
