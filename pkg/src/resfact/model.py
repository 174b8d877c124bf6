"""Spectral data of the two-channel operator matrix.

A model supplies the bounded selfadjoint operator ``tilde_a1`` acting in the
second channel and the operator-valued density ``K'(mu)`` of the coupling
with respect to the spectral measure of the unbounded first-channel entry.
The density is real-analytic on ``[alpha0, inf)`` and is evaluated off the
axis through its analytic continuation into the holomorphy domain.

Densities are represented in factored form ``K'(mu) = L(mu) @ R(mu)`` with
``L`` of shape ``(n, r)`` and ``R`` of shape ``(r, n)``; every contour
integral in the package is a weighted sum over such factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import EndpointSingularity, InvalidOperand, OutsideHolomorphyDomain
from .linalg import as_operator, is_hermitian, psd_factor
from .quadrature import composite_rule

TAIL_TARGET = 1e-10
CUTOFF_MAX = 1e6


# ---------------------------------------------------------------------------
# holomorphy domains (upper half; the lower half is the mirror image)


@dataclass(frozen=True)
class StripDomain:
    """``{0 < Im mu < height, Re mu > alpha0 - width}``."""

    alpha0: float
    height: float = math.inf
    width: float = math.inf

    def contains_upper(self, mu):
        mu = np.asarray(mu, dtype=complex)
        return (mu.imag > 0) & (mu.imag < self.height) & (mu.real > self.alpha0 - self.width)

    def describe(self):
        return {"kind": "strip", "height": self.height, "width": self.width}


@dataclass(frozen=True)
class ParabolaDomain:
    """Interior of the parabola ``Re mu > lambda0 - a^2 + (Im mu)^2 / (4 a^2)``,
    i.e. ``|Im sqrt(mu - lambda0)| < a``."""

    lambda0: float
    alpha: float

    def contains_upper(self, mu):
        mu = np.asarray(mu, dtype=complex)
        a2 = self.alpha ** 2
        return (mu.imag > 0) & (mu.real > self.lambda0 - a2 + mu.imag ** 2 / (4 * a2))

    def describe(self):
        return {"kind": "parabola", "lambda0": self.lambda0, "alpha": self.alpha}


# ---------------------------------------------------------------------------
# scalar profile presets

def _shape(kind: str, width: float) -> Callable:
    if width <= 0:
        raise ValueError("preset width must be positive")
    if kind == "gaussian":
        return lambda x: np.exp(-(np.asarray(x) / width) ** 2)
    if kind == "exp-decay":
        return lambda x: np.exp(-np.abs(np.asarray(x)) / width)
    if kind == "bump":
        def bump(x):
            u = np.asarray(x, dtype=float) / width
            out = np.zeros_like(u)
            inside = np.abs(u) < 1
            out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
            return out
        return bump
    if kind == "constant":
        return lambda x: np.ones_like(np.asarray(x, dtype=float))
    raise ValueError(f"unknown preset {kind!r}")


SPATIAL_PRESETS = ("gaussian", "exp-decay", "bump", "constant")
PHI_PRESETS = ("gaussian", "exp-decay", "bump", "zero")


@dataclass(frozen=True)
class PhiProfile:
    """Scalar spectral profile ``amp * (mu - alpha0)^gamma * shape(mu)``.

    ``shape`` is ``exp(-(mu-alpha0)/scale)`` (exp-decay),
    ``exp(-((mu-alpha0)/scale)^2)`` (gaussian) or the Lorentzian
    ``1 / (1 + ((mu-center)/scale)^2)`` (bump), all analytic off the cut.
    """

    kind: str
    alpha0: float
    amplitude: float = 1.0
    scale: float = 1.0
    gamma: float = 0.0
    center: float | None = None

    def __post_init__(self):
        if self.kind not in PHI_PRESETS:
            raise ValueError(f"unknown phi preset {self.kind!r}")
        if not -1.0 < self.gamma <= 0.0:
            raise ValueError("endpoint exponent must lie in (-1, 0]")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    def __call__(self, mu):
        mu = np.asarray(mu, dtype=complex)
        if self.kind == "zero" or self.amplitude == 0:
            return np.zeros_like(mu)
        d = mu - self.alpha0
        base = self.amplitude * (d ** self.gamma if self.gamma != 0 else 1.0)
        if self.kind == "exp-decay":
            return base * np.exp(-d / self.scale)
        if self.kind == "gaussian":
            return base * np.exp(-(d / self.scale) ** 2)
        c = self.alpha0 + self.scale if self.center is None else self.center
        return base / (1.0 + ((mu - c) / self.scale) ** 2)

    @property
    def holomorphy_height(self) -> float:
        return self.scale if self.kind == "bump" else math.inf

    def scaled(self, factor: float) -> "PhiProfile":
        return PhiProfile(self.kind, self.alpha0, self.amplitude * factor,
                          self.scale, self.gamma, self.center)


# ---------------------------------------------------------------------------


class SpectralDensity:
    """Interface shared by the concrete models.

    Subclasses set ``alpha0``, ``endpoint_exponent``, ``endpoint_constant``,
    ``domain`` and implement :meth:`factors`, :meth:`tilde_a1`,
    :meth:`decay_profile` and :meth:`scaled`.
    """

    alpha0: float
    endpoint_exponent: float
    endpoint_constant: float
    domain: StripDomain | ParabolaDomain
    spectral_cutoff: float | None = None

    @property
    def dim(self) -> int:
        return self.tilde_a1().shape[0]

    def factors(self, mu):
        """Vectorized ``(L, R)`` with shapes ``(J, n, r)`` and ``(J, r, n)``."""
        raise NotImplementedError

    def tilde_a1(self) -> np.ndarray:
        raise NotImplementedError

    def decay_profile(self, mu: float) -> float:
        """Upper bound of ``||K'(mu)||`` for real ``mu > alpha0``."""
        raise NotImplementedError

    def scaled(self, s: float) -> "SpectralDensity":
        """Same model with every coupling multiplied by `s`."""
        raise NotImplementedError

    def in_domain(self, mu) -> np.ndarray:
        mu = np.asarray(mu, dtype=complex)
        on_cut = (mu.imag == 0) & (mu.real > self.alpha0)
        return on_cut | self.domain.contains_upper(mu) | self.domain.contains_upper(mu.conjugate())

    @cached_property
    def spectrum_tilde_a1(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.tilde_a1())

    @cached_property
    def norm_tilde_a1(self) -> float:
        ev = self.spectrum_tilde_a1
        return float(np.abs(ev).max(initial=0.0))

    def tail_bound(self, cutoff: float, weight: Callable[[float], float] | None = None) -> float:
        """Bound of ``int_cutoff^inf ||K'(mu)|| w(mu) dmu``, default
        ``w = 1/(1+mu)``."""
        if weight is None:
            weight = lambda mu: 1.0 / (1.0 + mu)
        f = lambda mu: self.decay_profile(mu) * weight(mu)
        total = 0.0
        a = cutoff
        # integrate piecewise on a growing grid so quad does not miss mass
        for _ in range(60):
            b = a * 2.0 + 1.0
            val, _err = integrate.quad(f, a, b, limit=200)
            total += val
            if val <= 1e-18 * max(total, 1e-300) or val == 0.0:
                break
            a = b
        else:
            val, _err = integrate.quad(f, a, np.inf, limit=200)
            total += val
        return float(total)

    @cached_property
    def cutoff(self) -> float:
        """Upper end of the represented part of the spectral interval.

        Either the explicit ``spectral_cutoff`` or the first point past which
        the tail weighted by ``1/(1+mu)`` is below ``TAIL_TARGET``.
        """
        if self.spectral_cutoff is not None:
            return float(self.spectral_cutoff)
        base = max(self.alpha0, float(self.spectrum_tilde_a1.max(initial=self.alpha0)))
        lam = base + 8.0
        while lam < CUTOFF_MAX:
            if self.tail_bound(lam) <= TAIL_TARGET:
                return lam
            lam = base + 2.0 * (lam - base)
        return CUTOFF_MAX


def eval_density(model: SpectralDensity, mu: complex) -> np.ndarray:
    """Dense value of ``K'(mu)`` with domain checks."""
    mu = complex(mu)
    if mu == model.alpha0:
        raise EndpointSingularity(f"density is singular at alpha0={model.alpha0}")
    if not bool(model.in_domain(mu)):
        raise OutsideHolomorphyDomain(f"mu={mu} lies outside the holomorphy domain")
    L, R = model.factors(np.array([mu]))
    return L[0] @ R[0]


# ---------------------------------------------------------------------------


@dataclass(eq=False)
class SeparableAnalyticModel(SpectralDensity):
    """``K'(mu) = phi(mu) G^* G`` with a scalar analytic profile."""

    phi: PhiProfile
    G: np.ndarray
    tilde_a1_matrix: np.ndarray
    strip_height: float | None = None
    spectral_cutoff: float | None = None

    def __post_init__(self):
        self.G = np.atleast_2d(np.asarray(self.G, dtype=complex))
        self.tilde_a1_matrix = as_operator(self.tilde_a1_matrix)
        if not is_hermitian(self.tilde_a1_matrix, tol=1e-14 * max(1.0, np.abs(self.tilde_a1_matrix).max())):
            raise InvalidOperand("tilde_a1 must be Hermitian")
        if self.G.shape[1] != self.tilde_a1_matrix.shape[0]:
            raise InvalidOperand("G must have as many columns as tilde_a1 has rows")
        self.alpha0 = float(self.phi.alpha0)
        self.endpoint_exponent = float(self.phi.gamma)
        h = self.phi.holomorphy_height
        if self.strip_height is not None:
            h = min(h, self.strip_height)
        self.domain = StripDomain(self.alpha0, height=h)
        self._gram_norm = float(np.linalg.norm(self.G.conj().T @ self.G, 2)) if self.G.size else 0.0
        # sup of |phi| (mu-alpha0)^-gamma over the real axis is the amplitude
        # for every preset (the smooth factor is bounded by one there)
        self.endpoint_constant = abs(self.phi.amplitude) * self._gram_norm if self.phi.kind != "zero" else 0.0

    def factors(self, mu):
        mu = np.asarray(mu, dtype=complex).ravel()
        ph = self.phi(mu)
        Gh = self.G.conj().T
        L = ph[:, None, None] * Gh[None, :, :]
        R = np.broadcast_to(self.G, (mu.size,) + self.G.shape)
        return L, R

    def tilde_a1(self):
        return self.tilde_a1_matrix

    def decay_profile(self, mu):
        return float(abs(self.phi(mu))) * self._gram_norm

    def scaled(self, s):
        return SeparableAnalyticModel(self.phi, s * self.G, self.tilde_a1_matrix,
                                      self.strip_height, self.spectral_cutoff)


def scalar_model(alpha0=1.0, tilde_a1=2.0, eps=0.05, kind="exp-decay", scale=1.0, gamma=0.0):
    """One-channel model ``phi = eps^2 shape(mu)``, ``tilde_a1`` a number."""
    phi = PhiProfile(kind, alpha0, amplitude=eps ** 2, scale=scale, gamma=gamma)
    return SeparableAnalyticModel(phi, np.ones((1, 1)), np.array([[tilde_a1]]))


# ---------------------------------------------------------------------------


def _principal_sqrt(w):
    return np.sqrt(np.asarray(w, dtype=complex))


@dataclass(eq=False)
class SchroedingerExampleModel(SpectralDensity):
    """Free particle on the line coupled to a multiplication operator.

    ``A0 = -d^2/dx^2 + lambda0``, ``A1 = a1(x)``, coupling through the
    multiplication by ``b(x)``.  The line is truncated to ``[-L, L]`` with
    ``N`` uniform points and trapezoid weights; operators act on
    ``sqrt(weight)``-scaled samples so that the discrete inner product is
    the Euclidean one.
    """

    lambda0: float
    x: np.ndarray
    b_samples: np.ndarray
    a1_samples: np.ndarray
    decay_alpha: float
    decay_c: float | None = None
    spectral_cutoff: float | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.b_samples = np.asarray(self.b_samples, dtype=float)
        self.a1_samples = np.asarray(self.a1_samples, dtype=float)
        if self.x.ndim != 1 or self.x.size < 2:
            raise ValueError("grid needs at least two points")
        if not (self.b_samples.shape == self.a1_samples.shape == self.x.shape):
            raise ValueError("b and a1 samples must match the grid")
        h = self.x[1] - self.x[0]
        if not np.allclose(np.diff(self.x), h):
            raise ValueError("grid must be uniform")
        w = np.full(self.x.size, h)
        w[0] = w[-1] = h / 2
        self.grid_weights = w
        self._sw = np.sqrt(w)
        envelope = np.exp(-self.decay_alpha * np.abs(self.x))
        if self.decay_c is None:
            self.decay_c = float(np.max(np.abs(self.b_samples) / envelope))
        if np.any(np.abs(self.b_samples) > self.decay_c * envelope * (1 + 1e-12)):
            raise ValueError("b violates |b(x)| <= c exp(-alpha |x|)")
        self.tilde_a1_samples = self.a1_samples - self.b_samples ** 2
        self.c_tilde = float(self.tilde_a1_samples.min() - self.lambda0)
        if self.c_tilde <= 0:
            raise ValueError("range of a1 - b^2 must lie above lambda0")
        self.alpha0 = float(self.lambda0)
        self.endpoint_exponent = -0.5
        self.b_norm = float(np.linalg.norm(self.b_samples * self._sw))
        self.endpoint_constant = self.b_norm ** 2 / math.sqrt(2 * math.pi)
        self.domain = ParabolaDomain(self.lambda0, self.decay_alpha)
        if self.spectral_cutoff is None:
            # the norm decays only like (mu - lambda0)^(-1/2); the represented
            # interval is cut at a fixed point and the tail bound reported
            self.spectral_cutoff = self.lambda0 + 400.0

    @classmethod
    def from_presets(cls, lambda0=1.0, L=10.0, N=256, b_kind="bump", b_amplitude=0.15,
                     b_width=1.0, a1_kind="constant", a1_base=2.0, a1_amplitude=0.0,
                     a1_width=1.0, decay_alpha=1.0, spectral_cutoff=None):
        x = np.linspace(-L, L, N)
        b = b_amplitude * _shape(b_kind, b_width)(x)
        a1 = a1_base + a1_amplitude * _shape(a1_kind, a1_width)(x)
        return cls(lambda0, x, b, a1, decay_alpha, spectral_cutoff=spectral_cutoff)

    def btilde(self, mu):
        """``(b+, b-)`` sampled and weight-scaled, shapes ``(J, N)``."""
        mu = np.asarray(mu, dtype=complex).ravel()
        s = _principal_sqrt(mu - self.lambda0)
        phase = np.exp(1j * s[:, None] * self.x[None, :])
        bw = (self.b_samples * self._sw)[None, :]
        return phase * bw, bw / phase

    def factors(self, mu):
        mu = np.asarray(mu, dtype=complex).ravel()
        s = _principal_sqrt(mu - self.lambda0)
        c = 1.0 / (2.0 * math.sqrt(2 * math.pi) * s)
        bp, bm = self.btilde(mu)
        L = np.stack([bp, bm], axis=2) * c[:, None, None]
        R = np.stack([bm, bp], axis=1)
        return L, R

    def tilde_a1(self):
        return np.diag(self.tilde_a1_samples).astype(complex)

    @cached_property
    def spectrum_tilde_a1(self):
        return np.sort(self.tilde_a1_samples)

    def decay_profile(self, mu):
        d = mu - self.lambda0
        if d <= 0:
            return math.inf
        return self.b_norm ** 2 / (math.sqrt(2 * math.pi) * math.sqrt(d))

    def norm_bound(self, mu) -> float:
        """Rank-two bound ``|s|^-1 ||b+|| ||b-|| / sqrt(2 pi)``."""
        bp, bm = self.btilde(mu)
        s = abs(_principal_sqrt(complex(mu) - self.lambda0))
        return float(np.linalg.norm(bp) * np.linalg.norm(bm) / (math.sqrt(2 * math.pi) * s))

    def scaled(self, s):
        return SchroedingerExampleModel(self.lambda0, self.x, s * self.b_samples, self.a1_samples,
                                        self.decay_alpha, spectral_cutoff=self.spectral_cutoff)


def tilde_a1(model: SpectralDensity) -> np.ndarray:
    return model.tilde_a1()


# ---------------------------------------------------------------------------


@dataclass(eq=False)
class DiscretizedFullMatrix:
    """Finite Hermitian block matrix realising a model on ``K`` cells.

    The first channel is ``diag(mu_k I_{r_k})``; the couplings are the
    stacked ``sqrt(mu_k) G_k`` with ``G_k^* G_k = K'(mu_k) delta_k``.
    """

    nodes: np.ndarray
    widths: np.ndarray
    couplings: list
    tilde_a1: np.ndarray
    a1_block: np.ndarray = field(init=False)
    H: np.ndarray = field(init=False)

    def __post_init__(self):
        n = self.tilde_a1.shape[0]
        gram = sum((G.conj().T @ G for G in self.couplings), np.zeros((n, n), complex))
        self.a1_block = self.tilde_a1 + gram
        ranks = [G.shape[0] for G in self.couplings]
        m = int(sum(ranks))
        H = np.zeros((m + n, m + n), dtype=complex)
        diag = np.concatenate([np.full(r, mu) for r, mu in zip(ranks, self.nodes)]) if m else np.zeros(0)
        H[np.arange(m), np.arange(m)] = diag
        if m:
            T01 = np.vstack([math.sqrt(mu) * G for G, mu in zip(self.couplings, self.nodes)])
            H[:m, m:] = T01
            H[m:, :m] = T01.conj().T
        H[m:, m:] = self.a1_block
        self.H = H
        self.first_dim = m

    def m1(self, z: complex) -> np.ndarray:
        n = self.tilde_a1.shape[0]
        out = self.tilde_a1 - z * np.eye(n)
        for G, mu in zip(self.couplings, self.nodes):
            out = out + (z / (z - mu)) * (G.conj().T @ G)
        return out

    def resolvent_block(self, z: complex) -> np.ndarray:
        m = self.first_dim
        N = self.H.shape[0]
        cols = np.linalg.solve(self.H - z * np.eye(N), np.eye(N)[:, m:])
        return cols[m:]


def build_discretized_full_matrix(model: SpectralDensity, Lambda: float, K: int,
                                  tol_psd: float = 1e-12, points_per_cell: int = 1) -> DiscretizedFullMatrix:
    """Discretize ``[alpha0, Lambda]`` into geometric cells (finest at
    ``alpha0``) and build the Hermitian block matrix.

    With ``points_per_cell = 1`` there are `K` cells with one midpoint node
    each.  Larger values split `K` nodes into ``K // points_per_cell``
    geometric panels carrying Gauss nodes, whose weights take the role of
    the cell widths.
    """
    if Lambda <= model.alpha0:
        raise ValueError("Lambda must exceed alpha0")
    if K < 2:
        raise ValueError("need at least two cells")
    if points_per_cell < 1 or K % points_per_cell:
        raise ValueError("K must be a multiple of points_per_cell")
    cells = K // points_per_cell
    span = Lambda - model.alpha0
    first = min(1e-3 * span, span / cells)
    ratio = _geometric_ratio(span, first, cells)
    widths = first * ratio ** np.arange(cells)
    widths *= span / widths.sum()
    edges = model.alpha0 + np.concatenate([[0.0], np.cumsum(widths)])
    if points_per_cell == 1:
        nodes = 0.5 * (edges[:-1] + edges[1:])
    else:
        nodes, widths, _ = composite_rule(edges, points_per_cell, model.endpoint_exponent)
    L, R = model.factors(nodes.astype(complex))
    couplings = []
    for k in range(nodes.size):
        Kk = L[k] @ R[k]
        Kk = 0.5 * (Kk + Kk.conj().T)
        couplings.append(psd_factor(Kk * widths[k], tol_psd))
    return DiscretizedFullMatrix(nodes, widths, couplings, model.tilde_a1().copy())


def _geometric_ratio(span, first, K):
    # solve first * (q^K - 1)/(q - 1) = span for q >= 1
    if first * K >= span:
        return 1.0
    lo, hi = 1.0 + 1e-12, 2.0
    while first * (hi ** K - 1) / (hi - 1) < span:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if first * (mid ** K - 1) / (mid - 1) < span:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
