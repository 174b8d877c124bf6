"""Deformed integration paths, variation integrals and admissibility.

A contour on sheet ``l`` (``+1`` upper, ``-1`` lower) starts at ``alpha0``,
follows a half-ellipse of the given height into the holomorphy domain,
returns to the real axis at ``re_entry`` and then runs along the real axis
to the model cutoff.  All integrals over it are weighted node sums held in
a :class:`NodeTable`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (ContourDegenerate, ContourOutsideDomain, ContourTouchesSpectrum,
                     DivergentVariation, NoAdmissibleContour, UnboundedTail)
from .model import SpectralDensity
from .quadrature import composite_rule, panel_edges

TOL_QUAD_FLOOR = 1e-10
TAIL_GROWTH = 0.25
MARGIN_FACTOR = 10.0


class NodeTable:
    """Quadrature nodes with the factored density evaluated at each node."""

    def __init__(self, nodes, weights, spacing, L, R):
        self.nodes = np.asarray(nodes, dtype=complex)
        self.weights = np.asarray(weights, dtype=complex)
        self.spacing = np.asarray(spacing, dtype=float)
        self.L = L
        self.R = R
        J, n, r = L.shape
        self.n, self.r = n, r
        self.rows = np.flatnonzero(np.any(L != 0, axis=(0, 2))) if J else np.zeros(0, int)
        self.cols = np.flatnonzero(np.any(R != 0, axis=(0, 1))) if J else np.zeros(0, int)
        self._Lflat = L[:, self.rows, :].transpose(1, 0, 2).reshape(self.rows.size, J * r)
        self._Rflat = R[:, :, self.cols].reshape(J * r, self.cols.size)

    @classmethod
    def from_model(cls, model, nodes, weights, spacing):
        L, R = model.factors(nodes)
        return cls(nodes, weights, spacing, L, R)

    def __len__(self):
        return self.nodes.size

    def weighted_sum(self, coeff) -> np.ndarray:
        """``sum_j coeff_j K'(mu_j)`` as a dense ``n x n`` matrix."""
        out = np.zeros((self.n, self.n), dtype=complex)
        if self.rows.size and self.cols.size:
            c = np.repeat(np.asarray(coeff, dtype=complex), self.r)
            out[np.ix_(self.rows, self.cols)] = (self._Lflat * c[None, :]) @ self._Rflat
        return out

    @cached_property
    def density_norms(self) -> np.ndarray:
        """``||K'(mu_j)||`` for every node."""
        if len(self) == 0:
            return np.zeros(0)
        _, rl = np.linalg.qr(self.L)
        _, rr = np.linalg.qr(self.R.conj().transpose(0, 2, 1))
        core = rl @ rr.conj().transpose(0, 2, 1)
        return np.linalg.norm(core, ord=2, axis=(1, 2))

    def dense(self, j) -> np.ndarray:
        return self.L[j] @ self.R[j]


@dataclass(eq=False)
class Contour:
    model: SpectralDensity
    l: int
    height: float
    re_entry: float
    points_per_segment: int
    panel_width: float
    tail_points: int
    cutoff: float
    nodes: np.ndarray
    weights: np.ndarray
    spacing: np.ndarray
    n_arc: int
    tail_error_bound: float

    @property
    def alpha0(self):
        return self.model.alpha0

    @property
    def center(self):
        return 0.5 * (self.alpha0 + self.re_entry)

    @property
    def semi_axis(self):
        return 0.5 * (self.re_entry - self.alpha0)

    def arc(self, t):
        t = np.asarray(t, dtype=float)
        return self.center - self.semi_axis * np.cos(t) + 1j * self.l * self.height * np.sin(t)

    @cached_property
    def table(self) -> NodeTable:
        return NodeTable.from_model(self.model, self.nodes, self.weights, self.spacing)

    def contains(self, z) -> np.ndarray:
        """Membership in the region enclosed by the arc and the real axis."""
        z = np.asarray(z, dtype=complex)
        u = (z.real - self.center) / self.semi_axis
        v = z.imag / self.height
        return (self.l * z.imag > 0) & (u * u + v * v < 1.0)

    def distance(self, z) -> np.ndarray:
        """Euclidean distance from each `z` to the path."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        t = np.linspace(0.0, math.pi, 2001)
        pts = self.arc(t)
        out = np.empty(z.size)
        for k, zk in enumerate(z):
            d = np.abs(pts - zk)
            i = int(np.argmin(d))
            lo, hi = t[max(i - 1, 0)], t[min(i + 1, t.size - 1)]
            res = minimize_scalar(lambda s: abs(self.arc(s) - zk), bounds=(lo, hi),
                                  method="bounded", options={"xatol": 1e-13})
            best = min(d[i], float(res.fun))
            # real tail [re_entry, cutoff]
            x = min(max(zk.real, self.re_entry), self.cutoff)
            best = min(best, abs(zk - x))
            out[k] = best
        return out

    def margin_at(self, z) -> tuple[float, float]:
        """Distance from `z` to the nearest node and the required margin."""
        d = np.abs(self.nodes - z)
        j = int(np.argmin(d))
        return float(d[j]), MARGIN_FACTOR * float(self.spacing[j])

    def too_close(self, z) -> bool:
        d, m = self.margin_at(z)
        return d < m

    def rebuild(self, **changes) -> "Contour":
        params = dict(l=self.l, height=self.height, re_entry=self.re_entry,
                      points_per_segment=self.points_per_segment,
                      panel_width=self.panel_width, tail_points=self.tail_points,
                      cutoff=self.cutoff)
        params.update(changes)
        return build_contour(self.model, **params)

    def mirrored(self) -> "Contour":
        return self.rebuild(l=-self.l)

    def refined(self, factor: int = 2) -> "Contour":
        return self.rebuild(points_per_segment=self.points_per_segment * factor,
                            tail_points=self.tail_points * factor)

    @cached_property
    def tol_quad(self) -> float:
        """Quadrature error estimate from one refinement step."""
        fine = self.refined()
        v_a, v_b = var1_on_contour(self.model, self), var1_on_contour(self.model, fine)
        est = abs(v_a - v_b) / max(abs(v_b), 1e-300) if v_b else 0.0
        z = self.center + 0.5j * self.l * self.height
        for zz in (z, z.conjugate()):
            c_a = zz / (zz - self.nodes) * self.weights
            c_b = zz / (zz - fine.nodes) * fine.weights
            ma = self.table.weighted_sum(c_a)
            mb = fine.table.weighted_sum(c_b)
            scale = 1.0 + np.linalg.norm(mb, 2)
            est = max(est, float(np.linalg.norm(ma - mb, 2)) / scale)
        return max(TOL_QUAD_FLOOR, est)

    def describe(self) -> dict:
        return {"l": self.l, "height": self.height, "re_entry": self.re_entry,
                "points_per_segment": self.points_per_segment,
                "panel_width": self.panel_width, "tail_points": self.tail_points,
                "cutoff": self.cutoff, "nodes": int(self.nodes.size),
                "tail_error_bound": self.tail_error_bound}


def build_contour(model: SpectralDensity, l: int = 1, height: float = 0.3,
                  re_entry: float | None = None, points_per_segment: int = 16,
                  panel_width: float = 0.05, tail_points: int = 24,
                  cutoff: float | None = None) -> Contour:
    """Half-ellipse from ``alpha0`` to `re_entry` on sheet `l`, then the real
    tail up to the model cutoff."""
    if l not in (1, -1):
        raise ValueError("sheet index must be +1 or -1")
    alpha0 = model.alpha0
    if re_entry is None:
        re_entry = float(model.spectrum_tilde_a1.max()) + 1.0
    if not (height > 1e-10) or not math.isfinite(height):
        raise ContourDegenerate("the arc must enter the complex plane (height > 0)")
    if re_entry <= alpha0:
        raise ContourDegenerate("re-entry point must lie right of alpha0")
    a = 0.5 * (re_entry - alpha0)
    c = 0.5 * (re_entry + alpha0)
    t_chk = np.linspace(0.0, math.pi, 4003)[1:-1]
    chk = c - a * np.cos(t_chk) + 1j * height * np.sin(t_chk)
    if not np.all(model.domain.contains_upper(chk)):
        raise ContourOutsideDomain("arc leaves the holomorphy domain")

    if cutoff is None:
        try:
            cutoff = model.cutoff
        except NotImplementedError as exc:
            raise UnboundedTail("model has neither decay profile nor cutoff") from exc
    if cutoff <= re_entry:
        raise UnboundedTail(f"cutoff {cutoff} must exceed re-entry point {re_entry}")
    try:
        tail_bound = model.tail_bound(cutoff)
    except NotImplementedError as exc:
        raise UnboundedTail("model has no decay profile") from exc
    if not math.isfinite(tail_bound):
        raise UnboundedTail("tail of the variation integral is not finite")

    n_pan = max(4, int(math.ceil(math.pi * max(a, height) / panel_width)))
    t_edges = np.linspace(0.0, math.pi, n_pan + 1)
    t, wt, _ = composite_rule(t_edges, points_per_segment, model.endpoint_exponent)
    mu_arc = c - a * np.cos(t) + 1j * l * height * np.sin(t)
    dmu = a * np.sin(t) + 1j * l * height * np.cos(t)
    w_arc = wt * dmu
    sp_arc = np.full(t.size, math.pi * max(a, height) / (n_pan * points_per_segment))

    edges = panel_edges(re_entry, cutoff, panel_width * 2, growth=TAIL_GROWTH, uniform_until=re_entry)
    x, wx, sp_tail = composite_rule(edges, tail_points)
    nodes = np.concatenate([mu_arc, x.astype(complex)])
    weights = np.concatenate([w_arc, wx.astype(complex)])
    spacing = np.concatenate([sp_arc, sp_tail])
    return Contour(model, l, float(height), float(re_entry), points_per_segment, panel_width,
                   tail_points, float(cutoff), nodes, weights, spacing, int(t.size),
                   float(tail_bound))


def real_axis_table(model: SpectralDensity, upper_uniform: float, panel_width: float = 0.05,
                    points: int = 16, cutoff: float | None = None, extra_edges=None) -> NodeTable:
    """Node table for ``[alpha0, cutoff]``: uniform panels up to
    `upper_uniform`, growing beyond; the first panel absorbs the endpoint
    singularity.  `extra_edges` are merged into the panel edges."""
    cutoff = model.cutoff if cutoff is None else cutoff
    upper = min(max(upper_uniform, model.alpha0 + panel_width), cutoff)
    edges = panel_edges(model.alpha0, cutoff, panel_width, growth=TAIL_GROWTH, uniform_until=upper)
    if extra_edges is not None:
        extra = np.asarray(extra_edges, dtype=float)
        extra = extra[(extra > model.alpha0) & (extra < cutoff)]
        edges = np.unique(np.concatenate([edges, extra]))
        # drop slivers left next to an original edge
        keep = np.concatenate([[True], np.diff(edges) > 1e-12 * (1 + np.abs(edges[1:]))])
        edges = edges[keep]
    x, w, sp = composite_rule(edges, points, model.endpoint_exponent)
    return NodeTable.from_model(model, x.astype(complex), w.astype(complex), sp)


def var_theta_real(model: SpectralDensity, theta: float, Lambda: float | None = None,
                   panel_width: float = 0.05, points: int = 16) -> float:
    """``int_{alpha0}^{inf} (1+|mu|)^-theta ||K'(mu)|| dmu``; the part beyond
    `Lambda` is replaced by the decay-profile bound."""
    if model.endpoint_exponent <= -1:
        raise DivergentVariation("endpoint singularity is not integrable")
    Lambda = model.cutoff if Lambda is None else Lambda
    table = real_axis_table(model, model.alpha0 + 4.0, panel_width, points, cutoff=Lambda)
    mu = table.nodes.real
    body = float(np.sum(np.abs(table.weights) * (1 + np.abs(mu)) ** (-theta) * table.density_norms))
    tail = model.tail_bound(Lambda, weight=lambda m: (1 + abs(m)) ** (-theta))
    return body + tail


def _var1_table(table: NodeTable) -> float:
    return float(np.sum(np.abs(table.weights) * table.density_norms / (1 + np.abs(table.nodes))))


def var1_on_contour(model: SpectralDensity, contour: Contour) -> float:
    """Modified variation ``int |dmu| ||K'(mu)|| / (1+|mu|)`` along the path."""
    return _var1_table(contour.table) + contour.tail_error_bound


@dataclass
class AdmissibilityReport:
    var1: float
    var_tilde: float
    d0: float
    omega: float
    r_min: float
    r_max: float
    condition1_ok: bool
    condition2_ok: bool
    norm_tilde_a1: float

    @property
    def admissible(self) -> bool:
        return self.condition1_ok and self.condition2_ok

    @property
    def region_radius(self) -> float:
        """Radius ``d0 (1 - var_tilde) / 2`` of the spectral-equality set."""
        return 0.5 * self.d0 * (1.0 - self.var_tilde)

    @property
    def w1_inverse_bound(self) -> float:
        v, d, a = self.var_tilde, self.d0, self.norm_tilde_a1
        q = 4 * v * (d + a) / (d * (1 + v) ** 2)
        return 1.0 / (1.0 - q) if q < 1 else math.inf

    def to_dict(self) -> dict:
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, float) and not math.isfinite(v):
                out[k] = None
        out["admissible"] = self.admissible
        return out


def admissibility(model: SpectralDensity, contour: Contour) -> AdmissibilityReport:
    """Variation integrals and the solvability constants for `contour`.

    ``d0`` is the distance from the contour to ``spectrum(tilde_a1)`` alone;
    no other part of the unperturbed spectrum enters.
    """
    spec = model.spectrum_tilde_a1
    d0 = float(contour.distance(spec).min())
    if d0 <= 1e-14:
        raise ContourTouchesSpectrum("contour meets the spectrum of tilde_a1")
    table = contour.table
    dist = np.abs(table.nodes[:, None] - spec[None, :]).min(axis=1)
    if np.any(dist == 0):
        raise ContourTouchesSpectrum("a quadrature node sits on the spectrum of tilde_a1")
    lam_max = float(spec.max())
    var1 = var1_on_contour(model, contour)
    var_t = float(np.sum(np.abs(table.weights) * table.density_norms / dist))
    var_t += model.tail_bound(contour.cutoff, weight=lambda m: 1.0 / (m - lam_max))
    a = model.norm_tilde_a1
    v = var_t
    cond1 = v < 1.0
    cond2 = v * a < 0.25 * d0 * (1.0 - v) ** 2
    omega = d0 * (1.0 - v) ** 2 - 4.0 * a * v
    rad_min = 0.25 * d0 ** 2 * (1.0 - v) ** 2 - d0 * v * a
    if cond1 and cond2 and rad_min >= 0:
        r_min = 0.5 * d0 * (1.0 - v) - math.sqrt(rad_min)
        r_max = d0 - math.sqrt(v * d0 * (d0 + a))
    else:
        cond2 = cond2 and rad_min >= 0
        r_min = math.nan
        r_max = d0 - math.sqrt(v * d0 * (d0 + a)) if cond1 else math.nan
    return AdmissibilityReport(var1, var_t, d0, omega, r_min, r_max, bool(cond1), bool(cond2), a)


def estimate_r0(model: SpectralDensity, contours) -> float:
    """Smallest ``r_min`` over the admissible members of a contour family."""
    vals = []
    for c in contours:
        rep = admissibility(model, c)
        if rep.admissible and rep.omega > 0:
            vals.append(rep.r_min)
    if not vals:
        raise NoAdmissibleContour("no admissible contour in the family")
    return float(min(vals))
