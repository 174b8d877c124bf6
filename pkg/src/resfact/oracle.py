"""Brute-force references: determinant zeros by the argument principle,
the block-resolvent identity on a finite full matrix, and coupling sweeps."""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .contour import Contour, admissibility, build_contour
from .errors import IllConditionedSample, ResfactError, UnresolvedRegion
from .model import DiscretizedFullMatrix, SpectralDensity
from .solver import solve_basic_equation
from .transfer import _decoupled_support

log = logging.getLogger(__name__)

MIN_CELL = 1e-6
PHASE_STEP = math.pi / 4
SPLIT_AT = 0.4567


@dataclass(frozen=True)
class RootSearchRegion:
    re_min: float
    re_max: float
    im_min: float
    im_max: float
    density: int = 8
    tol: float = 1e-10
    min_cell: float = MIN_CELL

    def __post_init__(self):
        if not (self.re_max > self.re_min and self.im_max > self.im_min):
            raise ValueError("empty search rectangle")

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return ((z.real > self.re_min) & (z.real < self.re_max)
                & (z.imag > self.im_min) & (z.imag < self.im_max))

    def boundary(self, per_side: int = 32) -> np.ndarray:
        s = np.linspace(0, 1, per_side, endpoint=False)
        a, b = complex(self.re_min, self.im_min), complex(self.re_max, self.im_min)
        c, d = complex(self.re_max, self.im_max), complex(self.re_min, self.im_max)
        return np.concatenate([a + (b - a) * s, b + (c - b) * s, c + (d - c) * s, d + (a - d) * s])


def o_region_rectangles(model: SpectralDensity, rho: float, **kw) -> list:
    """Rectangles inside ``{dist(z, spectrum(tilde_a1)) <= rho}``, one per
    cluster of the spectrum (points closer than ``rho``)."""
    spec = np.sort(model.spectrum_tilde_a1)
    groups = [[spec[0]]]
    for v in spec[1:]:
        if v - groups[-1][-1] <= rho:
            groups[-1].append(v)
        else:
            groups.append([v])
    m = 0.7 * rho
    return [RootSearchRegion(g[0] - m, g[-1] + m, -m, m, **kw) for g in groups]


# ---------------------------------------------------------------------------
# log-determinant of the continued transfer function


class _LogDet:
    """``log det M1(z, contour)`` with decoupled channels split off.

    Channels on which the density vanishes identically and which
    ``tilde_a1`` does not couple to the rest contribute the eigenvalues of
    their ``tilde_a1`` block as exact zeros.
    """

    def __init__(self, model: SpectralDensity, contour: Contour):
        table = contour.table
        A = model.tilde_a1()
        live = np.any(table.L != 0, axis=(0, 2)) | np.any(table.R != 0, axis=(0, 1))
        S = _decoupled_support(A, live)
        if S is None:
            S = np.arange(A.shape[0])
            self.trivial = np.zeros(0)
        else:
            Z = np.flatnonzero(~live)
            self.trivial = np.linalg.eigvalsh(A[np.ix_(Z, Z)])
        k = S.size
        L, R = table.L[:, S, :], table.R[:, :, S]
        J = L.shape[0]
        # per-node outer products, flattened for one matrix product per batch
        P = np.einsum("jar,jrb->jab", L, R).reshape(J, k * k)
        # the node products span a low-dimensional space for smooth densities
        if J > 0 and k * k > 16:
            U, sv, Vh = np.linalg.svd(P, full_matrices=False)
            q = int(np.sum(sv > 1e-15 * sv[0])) if sv[0] > 0 else 0
            self._U, self._V = U[:, :q] * sv[:q], Vh[:q]
        else:
            self._U, self._V = P, np.eye(k * k)
        self._nodes = table.nodes
        self._w = table.weights
        self._A = A[np.ix_(S, S)]
        self.k = k
        self._cache: dict = {}
        self.evals = 0

    def matrices(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        C = self._w[None, :] * (z[:, None] / (z[:, None] - self._nodes[None, :]))
        M = ((C @ self._U) @ self._V).reshape(z.size, self.k, self.k)
        M += self._A[None]
        M -= z[:, None, None] * np.eye(self.k)[None]
        return M

    def __call__(self, z) -> np.ndarray:
        """Complex ``log det`` (branch of the phase arbitrary)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        out = np.empty(z.size, dtype=complex)
        todo = [i for i, zz in enumerate(z) if zz not in self._cache]
        if todo:
            sign, logabs = np.linalg.slogdet(self.matrices(z[todo]))
            self.evals += len(todo)
            for i, s, la in zip(todo, sign, logabs):
                self._cache[z[i]] = la + 1j * np.angle(s) if s != 0 else -np.inf + 0j
        for i, zz in enumerate(z):
            out[i] = self._cache[zz]
        return out


def _wrap(d):
    return (d + np.pi) % (2 * np.pi) - np.pi


def _edge_change(f: _LogDet, a: complex, b: complex, step: float, depth: int = 0):
    """Continuous change of ``log det`` along ``[a, b]`` and
    ``sum z_mid * d(log det)`` for the centroid."""
    n = 9
    z = a + (b - a) * np.linspace(0, 1, n)
    v = f(z)
    if not np.all(np.isfinite(v)):
        raise UnresolvedRegion(f"det vanishes on a search edge near {a}")
    dv = np.diff(v.real) + 1j * _wrap(np.diff(v.imag))
    if np.max(np.abs(dv.imag)) <= step or depth > 40:
        if depth > 40:
            raise UnresolvedRegion(f"phase of det not resolved along edge near {a}")
        zm = 0.5 * (z[1:] + z[:-1])
        return complex(dv.sum()), complex((zm * dv).sum())
    total, mom = 0j, 0j
    for k in range(n - 1):
        t, m = _edge_change(f, z[k], z[k + 1], step, depth + 1)
        total += t
        mom += m
    return total, mom


def _box_integrals(f, box, step):
    x0, x1, y0, y1 = box
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
    total, mom = 0j, 0j
    for a, b in zip(corners, corners[1:] + corners[:1]):
        t, m = _edge_change(f, a, b, step)
        total += t
        mom += m
    return total, mom


def _count(f, box, step=PHASE_STEP):
    total, mom = _box_integrals(f, box, step)
    w = total.imag / (2 * math.pi)
    n = round(w)
    if abs(w - n) > 0.05:
        total, mom = _box_integrals(f, box, step / 2)
        w = total.imag / (2 * math.pi)
        n = round(w)
        if abs(w - n) > 0.05:
            raise UnresolvedRegion(f"non-integer winding number {w:.3f} on box {box}")
    return int(n), mom


def _newton(f: _LogDet, z0: complex, box, tol: float):
    """Newton on ``det`` (scaled by its value at the iterate) with central
    differences."""
    z = complex(z0)
    x0, x1, y0, y1 = box
    # the difference step must stay well below the box size
    h_box = 0.1 * max(x1 - x0, y1 - y0)
    for _ in range(30):
        h = min(1e-7 * (1 + abs(z)), h_box)
        l0, lp, lm = f([z, z + h, z - h])
        if not cmath.isfinite(l0):
            return z
        d = (np.exp(lp - l0) - np.exp(lm - l0)) / (2 * h)
        if d == 0 or not cmath.isfinite(d):
            return None
        dz = -1.0 / complex(d)
        z = z + dz
        if abs(dz) <= tol * (1 + abs(z)):
            return z
    return None


def find_transfer_zeros(model: SpectralDensity, contour: Contour, region: RootSearchRegion,
                        return_stats: bool = False):
    """Zeros of ``det M1(., contour)`` in `region` with multiplicity.

    Sub-rectangles are bisected until each holds one zero, which is then
    polished by Newton's method on ``log det``; clusters that survive down
    to the minimum cell size are reported at their centroid.
    """
    corners = region.boundary(8)
    if contour.distance(corners).min() <= 0 or any(contour.too_close(z) for z in region.boundary(16)):
        raise UnresolvedRegion("search region meets the contour")
    f = _LogDet(model, contour)
    box0 = (region.re_min, region.re_max, region.im_min, region.im_max)
    zeros = [complex(e) for e in f.trivial if region.contains(e)]
    # exact zeros on the boundary of the decoupled factor make no sense here
    if np.any(np.abs(f.trivial.real - region.re_min) < 1e-14) or np.any(np.abs(f.trivial - region.re_max) < 1e-14):
        raise UnresolvedRegion("a decoupled eigenvalue lies on the region boundary")
    n0, _ = _count(f, box0)
    n0b, _ = _count(f, box0, PHASE_STEP / 2)
    if n0 != n0b:
        raise UnresolvedRegion("winding number unstable under refinement")
    stack = [(box0, n0)]
    found = []
    while stack:
        box, n = stack.pop()
        if n == 0:
            continue
        x0, x1, y0, y1 = box
        size = max(x1 - x0, y1 - y0)
        if n == 1 and size < 0.25 * (1 + abs(complex(x0, y0))):
            _, mom = _count(f, box)
            z = _newton(f, mom / (2j * math.pi), box, region.tol)
            if z is not None and x0 <= z.real <= x1 and y0 <= z.imag <= y1:
                found.append((z, 1))
                continue
        if size <= region.min_cell:
            k, mom = _count(f, box, PHASE_STEP / 2)
            if k != n:
                raise UnresolvedRegion(f"winding number unstable in cell {box}")
            found.append((mom / (2j * math.pi * n), n))
            continue
        if x1 - x0 >= y1 - y0:
            xm = x0 + SPLIT_AT * (x1 - x0)
            kids = [(x0, xm, y0, y1), (xm, x1, y0, y1)]
        else:
            ym = y0 + SPLIT_AT * (y1 - y0)
            kids = [(x0, x1, y0, ym), (x0, x1, ym, y1)]
        counts = [_count(f, kb)[0] for kb in kids]
        if sum(counts) != n:
            counts = [_count(f, kb, PHASE_STEP / 4)[0] for kb in kids]
            if sum(counts) != n:
                raise UnresolvedRegion(f"winding numbers of sub-boxes do not add up in {box}")
        stack.extend(zip(kids, counts))
    for z, mult in found:
        zeros.extend([complex(z)] * mult)
    zeros.sort(key=lambda w: (w.real, w.imag))
    if return_stats:
        return zeros, {"evaluations": f.evals, "deflated": int(f.trivial.size)}
    return zeros


# ---------------------------------------------------------------------------
# full-matrix reference


def schur_identity_check(dfm: DiscretizedFullMatrix, z_samples) -> float:
    """Largest relative gap between ``M1_discrete(z)^{-1}`` and the lower
    right block of ``(H - z)^{-1}``."""
    # H is Hermitian, so the smallest singular value of H - z is the
    # distance from z to its spectrum
    spec = np.linalg.eigvalsh(dfm.H)
    worst = 0.0
    for z in z_samples:
        z = complex(z)
        if np.abs(spec - z).min() < 1e-12:
            raise IllConditionedSample(f"z={z} is too close to the spectrum of H")
        inv_m = np.linalg.inv(dfm.m1(z))
        block = dfm.resolvent_block(z)
        worst = max(worst, float(np.linalg.norm(inv_m - block, 2) / np.linalg.norm(block, 2)))
    return worst


# ---------------------------------------------------------------------------
# coupling sweep


SWEEP_COLUMNS = ("s", "branch_id", "re_lambda", "im_lambda", "certified", "r_min", "in_region", "status")


def _contour_for(model, contour: Contour) -> Contour:
    return build_contour(model, l=contour.l, height=contour.height, re_entry=contour.re_entry,
                         points_per_segment=contour.points_per_segment,
                         panel_width=contour.panel_width, tail_points=contour.tail_points,
                         cutoff=contour.cutoff)


def resonance_sweep(model: SpectralDensity, s_max: float, steps: int, contour: Contour,
                    tol: float = 1e-10, max_iter: int = 200) -> list:
    """Eigenvalues of ``H1`` along the coupling family ``s * B``.

    Branches are continued by optimal nearest-neighbour assignment between
    consecutive steps.  Steps where the solve fails are recorded with the
    error name in ``status``.
    """
    if steps < 1:
        raise ValueError("steps must be positive")
    rows = []
    prev = None
    ids = None
    for k in range(steps + 1):
        s = s_max * k / steps
        ms = model.scaled(s)
        try:
            cs = _contour_for(ms, contour)
            rep = admissibility(ms, cs)
            sol = solve_basic_equation(ms, cs, tol, max_iter, allow_noncertified=True, report=rep)
            lam = np.linalg.eigvals(sol.H1)
        except ResfactError as exc:
            log.warning("sweep step s=%g failed: %s", s, exc)
            rows.append({"s": s, "branch_id": -1, "re_lambda": math.nan, "im_lambda": math.nan,
                         "certified": False, "r_min": math.nan, "in_region": False,
                         "status": type(exc).__name__})
            continue
        if prev is None:
            order = np.lexsort((lam.imag, lam.real))
            lam = lam[order]
            ids = np.arange(lam.size)
        else:
            r, c = linear_sum_assignment(np.abs(prev[:, None] - lam[None, :]))
            lam = lam[c[np.argsort(r)]]
        prev = lam
        spec = ms.spectrum_tilde_a1
        rho = rep.region_radius
        for b, z in zip(ids, lam):
            in_o = bool(np.abs(spec - z).min() <= rho) if rep.admissible else False
            rows.append({"s": s, "branch_id": int(b), "re_lambda": float(z.real),
                         "im_lambda": float(z.imag), "certified": bool(sol.certified),
                         "r_min": float(rep.r_min), "in_region": in_o, "status": "ok"})
    return rows
