"""Composite Gauss rules on paths and real intervals."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@lru_cache(maxsize=64)
def _legendre(n):
    x, w = roots_legendre(n)
    return x, w


@lru_cache(maxsize=64)
def _jacobi(n, gamma):
    x, w = roots_jacobi(n, 0.0, gamma)
    return x, w


def gauss_legendre(n, a, b):
    x, w = _legendre(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def gauss_jacobi_left(n, gamma, a, b):
    """Nodes and weights for ``int_a^b f(t) dt`` where ``f ~ (t-a)^gamma g``.

    The algebraic factor is integrated exactly and divided back out of the
    weights, so the rule is applied to the full integrand ``f``.
    """
    if gamma == 0.0:
        return gauss_legendre(n, a, b)
    x, w = _jacobi(n, float(gamma))
    half = 0.5 * (b - a)
    t = a + half * (x + 1.0)
    weights = w * half ** (1.0 + gamma) / (t - a) ** gamma
    return t, weights


def panel_edges(start, stop, first_width, growth=0.0, uniform_until=None):
    """Edges of consecutive panels from `start` to `stop`.

    Widths are `first_width` up to `uniform_until`; beyond that they grow as
    ``max(first_width, growth * (x - start))``.
    """
    if uniform_until is None:
        uniform_until = stop
    edges = [start]
    x = start
    while x < stop - 1e-14 * max(1.0, abs(stop)):
        w = first_width
        if x >= uniform_until and growth > 0:
            w = max(first_width, growth * (x - start))
        nxt = min(x + w, stop)
        # avoid a sliver panel at the end
        if stop - nxt < 0.25 * w:
            nxt = stop
        edges.append(nxt)
        x = nxt
    return np.array(edges)


def composite_rule(edges, points, gamma_first=0.0):
    """Composite rule over `edges`; the first panel may carry an algebraic
    endpoint factor ``(t - edges[0])^gamma_first``."""
    xs, ws = [], []
    for k in range(len(edges) - 1):
        if k == 0 and gamma_first != 0.0:
            x, w = gauss_jacobi_left(points, gamma_first, edges[0], edges[1])
        else:
            x, w = gauss_legendre(points, edges[k], edges[k + 1])
        xs.append(x)
        ws.append(w)
    if not xs:
        return np.zeros(0), np.zeros(0), np.zeros(0)
    spacing = np.concatenate([np.full(points, (edges[k + 1] - edges[k]) / points)
                              for k in range(len(edges) - 1)])
    return np.concatenate(xs), np.concatenate(ws), spacing


def circle_points(center, radius, points):
    theta = 2 * np.pi * np.arange(points) / points
    return center + radius * np.exp(1j * theta)
