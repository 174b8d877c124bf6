"""Factorization ``M1(z) = W1(z) (H1 - z)``, the operator ``Omega`` and the
contour-integral identities tying ``M1^{-1}`` to ``H1``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contour import Contour
from .errors import BadResidueContour, CircleNotIsolating, OmegaSingular
from .linalg import match_multisets
from .model import SpectralDensity
from .quadrature import circle_points
from .solver import SolveReport, solve_basic_equation
from .transfer import _sum_lr, check_separation, column_resolvents, m1_continued, row_resolvents

_ROW_CACHE: dict = {}


def _rows(contour: Contour, H: np.ndarray) -> np.ndarray:
    key = (id(contour), H.shape, hash(H.tobytes()))
    hit = _ROW_CACHE.get(key)
    if hit is None:
        if len(_ROW_CACHE) > 16:
            _ROW_CACHE.clear()
        hit = (contour, row_resolvents(H, contour.table.nodes, contour.table.R))
        _ROW_CACHE[key] = hit
    return hit[1]


def eval_W1(model: SpectralDensity, contour: Contour, H1, z: complex, check: bool = True) -> np.ndarray:
    """``I - int K'(H1-mu)^{-1} + z int K'(z-mu)^{-1}(H1-mu)^{-1}``."""
    H1 = np.asarray(H1, dtype=complex)
    if check:
        check_separation(contour, np.linalg.eigvals(H1))
    table = contour.table
    S = _rows(contour, H1)
    z = complex(z)
    first = _sum_lr(table, table.weights, table.L, S)
    second = _sum_lr(table, table.weights / (z - table.nodes), table.L, S)
    return np.eye(H1.shape[0]) - first + z * second


def factorization_residual(model, contour, report: SolveReport, z_samples) -> float:
    """``max ||M1 - W1 (H1 - z)|| / (1 + ||M1||)`` over the samples."""
    H = report.H1
    n = H.shape[0]
    worst = 0.0
    for z in z_samples:
        M = m1_continued(model, contour, z)
        W = eval_W1(model, contour, H, z, check=False)
        r = np.linalg.norm(M - W @ (H - z * np.eye(n)), 2) / (1 + np.linalg.norm(M, 2))
        worst = max(worst, float(r))
    return worst


def compute_Omega(model, contour: Contour, H1_l, H1_minus_l) -> np.ndarray:
    """``int mu (H1^(-l)* - mu)^{-1} K'(mu) (H1^(l) - mu)^{-1} dmu`` over the
    contour of sheet ``l``."""
    H1_l = np.asarray(H1_l, dtype=complex)
    adj = np.asarray(H1_minus_l, dtype=complex).conj().T
    check_separation(contour, np.concatenate([np.linalg.eigvals(H1_l), np.linalg.eigvals(adj)]))
    table = contour.table
    S = _rows(contour, H1_l)
    C = column_resolvents(adj, table.nodes, table.L)
    return _sum_lr(table, table.weights * table.nodes, C, S)


@dataclass
class SheetPair:
    """Solutions on a contour and on its mirror image."""

    model: SpectralDensity
    contour: Contour
    mirror: Contour
    report: SolveReport
    report_mirror: SolveReport
    Omega: np.ndarray = field(repr=False)
    Omega_mirror: np.ndarray = field(repr=False)

    @property
    def H(self):
        return self.report.H1

    @property
    def H_mirror(self):
        return self.report_mirror.H1

    @property
    def region_radius(self):
        return self.report.admissibility.region_radius


def solve_pair(model, contour: Contour, tol: float = 1e-10, max_iter: int = 200,
               allow_noncertified: bool = False) -> SheetPair:
    mirror = contour.mirrored()
    rep = solve_basic_equation(model, contour, tol, max_iter, allow_noncertified)
    rep_m = solve_basic_equation(model, mirror, tol, max_iter, allow_noncertified)
    om = compute_Omega(model, contour, rep.H1, rep_m.H1)
    om_m = compute_Omega(model, mirror, rep_m.H1, rep.H1)
    return SheetPair(model, contour, mirror, rep, rep_m, om, om_m)


# ---------------------------------------------------------------------------
# residue contours


@dataclass(frozen=True)
class Circle:
    center: complex
    radius: float
    points: int = 64

    def nodes(self):
        return circle_points(self.center, self.radius, self.points)

    def integrate(self, values) -> np.ndarray:
        """``-(2 pi i)^{-1} oint f dz`` by the trapezoid rule, given ``f`` at
        :meth:`nodes` stacked along axis 0."""
        z = self.nodes()
        dz = (z - self.center)[:, None, None]
        return -np.sum(values * dz, axis=0) / self.points

    def encloses(self, z) -> np.ndarray:
        return np.abs(np.asarray(z) - self.center) < self.radius


def _clusters(values, gap):
    values = np.sort(np.asarray(values, dtype=float))
    groups = [[values[0]]]
    for v in values[1:]:
        if v - groups[-1][-1] <= gap:
            groups[-1].append(v)
        else:
            groups.append([v])
    return groups


def default_loops(pair: SheetPair, points: int = 64) -> list:
    """One circle per connected cluster of the spectral-equality set."""
    rho = pair.region_radius
    spec = pair.model.spectrum_tilde_a1
    eig = np.linalg.eigvals(pair.H)
    loops = []
    for grp in _clusters(spec, rho):
        c = 0.5 * (grp[0] + grp[-1])
        near = np.abs(eig[:, None] - np.asarray(grp)[None, :]).min(axis=1) <= rho
        need = float(np.abs(eig[near] - c).max(initial=0.0))
        allow = 0.98 * rho
        loops.append(Circle(complex(c), 0.5 * (need + allow), points))
    return loops


def validate_loops(pair: SheetPair, loops) -> None:
    rho = pair.region_radius
    spec = pair.model.spectrum_tilde_a1
    eig = np.linalg.eigvals(pair.H)
    inside = np.zeros(eig.size, dtype=int)
    for c in loops:
        z = c.nodes()
        if np.abs(z[:, None] - spec[None, :]).min(axis=1).max() > rho:
            raise BadResidueContour("residue circle leaves the spectral-equality set")
        if pair.contour.distance(z).min() <= 0 or any(pair.contour.too_close(p) for p in z[::8]):
            raise BadResidueContour("residue circle meets the contour")
        if np.abs(eig - c.center).min(initial=np.inf) and np.any(np.abs(np.abs(eig - c.center) - c.radius) < 1e-12):
            raise BadResidueContour("an eigenvalue lies on the residue circle")
        inside += c.encloses(eig)
    if np.any(inside != 1):
        raise BadResidueContour("residue circles must enclose every eigenvalue of H1 exactly once")


def _loop_integrals(pair: SheetPair, loops, funcs) -> list:
    """Sum over loops of ``-(2 pi i)^{-1} oint f dz`` for each callable."""
    n = pair.H.shape[0]
    totals = [np.zeros((n, n), dtype=complex) for _ in funcs]
    for c in loops:
        z = c.nodes()
        vals = [np.empty((z.size, n, n), dtype=complex) for _ in funcs]
        for k, zk in enumerate(z):
            cache = {}
            for f, v in zip(funcs, vals):
                v[k] = f(zk, cache)
        for t, v in zip(totals, vals):
            t += c.integrate(v)
    return totals


def _m1_inv(pair):
    def f(z, cache):
        if "minv" not in cache:
            M = m1_continued(pair.model, pair.contour, z)
            s = np.linalg.svd(M, compute_uv=False)
            if s[-1] < 1e-13 * s[0]:
                raise BadResidueContour(f"M1 is numerically singular at z={z}")
            cache["minv"] = np.linalg.inv(M)
        return cache["minv"]
    return f


def _rel(a, b) -> float:
    return float(np.linalg.norm(a - b, 2) / max(1.0, np.linalg.norm(b, 2)))


def omega_identities(model, contour, pair: SheetPair, loops=None) -> dict:
    """Residuals of the reconstruction identities for ``(I + Omega)^{-1}``,
    ``H1`` and the similarity of ``H1^(l)*`` and ``H1^(-l)``."""
    loops = default_loops(pair) if loops is None else loops
    validate_loops(pair, loops)
    n = pair.H.shape[0]
    I = np.eye(n)
    Om, Om_m = pair.Omega, pair.Omega_mirror
    if np.linalg.svd(I + Om, compute_uv=False)[-1] < 1e-12:
        raise OmegaSingular("I + Omega is numerically singular")
    inv_om = np.linalg.inv(I + Om)
    minv = _m1_inv(pair)
    J0, J1 = _loop_integrals(pair, loops, [minv, lambda z, c: z * minv(z, c)])
    adj_m = pair.H_mirror.conj().T
    inv_om_m = np.linalg.inv(I + Om_m)
    return {
        "omega_norm": float(np.linalg.norm(Om, 2)),
        "omega_adjoint": float(np.linalg.norm(Om_m - Om.conj().T, 2)),
        "m_omega": _rel(J0, inv_om),
        "h_omega_left": _rel(J1, inv_om @ adj_m),
        "h_omega_right": _rel(J1, pair.H @ inv_om),
        "similarity": _rel(pair.H.conj().T, (I + Om_m) @ pair.H_mirror @ inv_om_m),
    }


def eigenprojection_residues(model, contour, pair: SheetPair, lam: complex,
                             radius: float | None = None, points: int = 64) -> dict:
    """Riesz projections at an isolated eigenvalue and the residue of
    ``M1^{-1}``, with the residuals of their product relations."""
    lam = complex(lam)
    eig = np.linalg.eigvals(pair.H)
    others = eig[np.abs(eig - lam) > 1e-12 * max(1.0, abs(lam))]
    if radius is None:
        gaps = [np.abs(others - lam).min(initial=np.inf),
                float(contour.distance([lam])[0])]
        spec = model.spectrum_tilde_a1
        gaps.append(2 * (pair.region_radius - float(np.abs(spec - lam).min())))
        radius = 0.5 * min(gaps)
    if not radius > 0 or not math.isfinite(radius):
        raise CircleNotIsolating(f"cannot isolate eigenvalue {lam}")
    circ = Circle(lam, radius, points)
    if np.any(circ.encloses(others)):
        raise CircleNotIsolating(f"another eigenvalue lies within {radius:.3g} of {lam}")
    n = pair.H.shape[0]
    I = np.eye(n)
    H, adj_m = pair.H, pair.H_mirror.conj().T
    minv = _m1_inv(pair)
    Pr, Pr_adj, P = _loop_integrals(pair, [circ], [
        lambda z, c: np.linalg.inv(H - z * I),
        lambda z, c: np.linalg.inv(adj_m - z * I),
        minv,
    ])
    inv_om = np.linalg.inv(I + pair.Omega)
    return {
        "lambda": lam,
        "radius": radius,
        "riesz": Pr,
        "riesz_adjoint": Pr_adj,
        "residue": P,
        "residue_pp_left": _rel(P, Pr @ inv_om),
        "residue_pp_right": _rel(P, inv_om @ Pr_adj),
        "idempotency": float(np.linalg.norm(Pr @ Pr - Pr, 2)),
        "trace": complex(np.trace(Pr)),
        "commutator": float(np.linalg.norm(Pr @ H - H @ Pr, 2)),
    }


def adjoint_relation_residual(model, contour_l, contour_ml, pair: SheetPair, z_samples) -> float:
    """``max ||W1(z,l)(H^(l) - z) - (H^(-l)* - z) W1(zbar,-l)^*||`` (relative)."""
    H, Hm = pair.H, pair.H_mirror
    n = H.shape[0]
    I = np.eye(n)
    worst = 0.0
    for z in z_samples:
        lhs = eval_W1(model, contour_l, H, z, check=False) @ (H - z * I)
        rhs = (Hm.conj().T - z * I) @ eval_W1(model, contour_ml, Hm, np.conj(z), check=False).conj().T
        worst = max(worst, _rel(lhs, rhs))
    return worst


def adjoint_spectrum_gap(pair: SheetPair) -> float:
    return match_multisets(np.linalg.eigvals(pair.H_mirror.conj().T), np.linalg.eigvals(pair.H))


def w1_inverse_check(model, contour, pair: SheetPair, z_samples):
    """Largest ``||W1^{-1}||`` and ``||W1 - I||`` over samples in the
    invertibility region, with the a-priori bound."""
    H = pair.H
    n = H.shape[0]
    worst_inv, worst_dev = 0.0, 0.0
    for z in z_samples:
        W = eval_W1(model, contour, H, z, check=False)
        s = np.linalg.svd(W, compute_uv=False)
        worst_inv = max(worst_inv, 1.0 / s[-1])
        worst_dev = max(worst_dev, float(np.linalg.norm(W - np.eye(n), 2)))
    return worst_inv, worst_dev, pair.report.admissibility.w1_inverse_bound


def region_samples(model, rho: float, count: int, rng) -> np.ndarray:
    """Random points with ``dist(z, spectrum(tilde_a1)) <= rho``."""
    spec = model.spectrum_tilde_a1
    centers = rng.choice(spec, size=count)
    r = rho * np.sqrt(rng.uniform(0, 1, count))
    th = rng.uniform(0, 2 * np.pi, count)
    return centers + r * np.exp(1j * th)
