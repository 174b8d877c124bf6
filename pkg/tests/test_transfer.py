import math

import numpy as np
import pytest

from builders import matrix, scalar, schroedinger, zero
from resfact.errors import NearContour, OnSpectralCut, SpectrumMeetsContour
from resfact.model import build_discretized_full_matrix, eval_density
from resfact.quadrature import circle_points
from resfact.transfer import (eval_M1_continued, eval_M1_physical, eval_V1_operator, m1_continued,
                              v1_norm_bound)


def test_physical_zero_density():
    m, _ = zero((2.0, 3.0))
    ev = eval_M1_physical(m, 1j)
    assert np.allclose(ev.value, np.diag([2 - 1j, 3 - 1j]), atol=0)
    assert ev.sheet == "physical"


def test_physical_at_origin_is_tilde_a1():
    m, _ = matrix(0, n=3)
    assert np.allclose(eval_M1_physical(m, 0.0).value, m.tilde_a1(), atol=1e-15)


def test_physical_on_cut_raises():
    m, _ = scalar()
    with pytest.raises(OnSpectralCut):
        eval_M1_physical(m, 2.0)


def test_physical_against_discretization():
    for m, c in (scalar(), matrix(0, n=4)):
        z = 2 + 3j
        d = build_discretized_full_matrix(m, m.cutoff, 320, points_per_cell=8)
        ref = eval_M1_physical(m, z)
        assert np.linalg.norm(d.m1(z) - ref.value, 2) <= c.tol_quad


def test_continued_zero_density():
    m, c = zero()
    for z in (2.0 + 0.1j, 1.5 - 0.2j, 5.0):
        assert np.allclose(m1_continued(m, c, z), m.tilde_a1() - z * np.eye(2), atol=0)


def test_continued_near_contour_raises():
    m, c = scalar()
    with pytest.raises(NearContour):
        eval_M1_continued(m, c, c.arc(1.0) + 1e-6)


def _between(c, rng, count):
    """Points strictly between the real axis and the arc."""
    out = []
    while len(out) < count:
        t = rng.uniform(0.2, math.pi - 0.2)
        top = c.arc(t)
        z = complex(top.real, top.imag * rng.uniform(0.2, 0.8))
        if not c.too_close(z):
            out.append(z)
    return out


@pytest.mark.parametrize("build", [scalar, lambda: matrix(2, n=3)])
def test_jump_relation(build):
    m, c = build()
    rng = np.random.default_rng(5)
    for z in _between(c, rng, 25):
        assert c.contains(z)
        jump = 2j * math.pi * c.l * z * eval_density(m, z)
        diff = m1_continued(m, c, z) - eval_M1_physical(m, z).value - jump
        assert np.linalg.norm(diff, 2) <= 2 * c.tol_quad


@pytest.mark.parametrize("build", [scalar, lambda: matrix(2, n=3)])
def test_coincidence_outside(build):
    m, c = build()
    rng = np.random.default_rng(6)
    for _ in range(25):
        z = complex(rng.uniform(0, 6), rng.choice([-1, 1]) * rng.uniform(0.05, 2))
        if c.contains(z) or c.too_close(z):
            continue
        diff = m1_continued(m, c, z) - eval_M1_physical(m, z).value
        assert np.linalg.norm(diff, 2) <= 2 * c.tol_quad


def test_conjugate_symmetry():
    for m, c in (scalar(), matrix(3, n=3)):
        mc = c.mirrored()
        rng = np.random.default_rng(7)
        for _ in range(50):
            z = complex(rng.uniform(0.5, 5), rng.uniform(-1, 1))
            if c.too_close(z) or mc.too_close(np.conj(z)):
                continue
            a = m1_continued(m, c, z).conj().T
            b = m1_continued(m, mc, np.conj(z))
            assert np.linalg.norm(a - b, 2) <= 2 * c.tol_quad


def test_holomorphy_probe():
    m, c = matrix(4, n=3)
    rng = np.random.default_rng(8)
    for z in _between(c, rng, 5) + [2.0 - 0.3j, 4.5 + 0.5j]:
        pts = circle_points(z, 0.01, 32)
        mean = sum(m1_continued(m, c, p) for p in pts) / pts.size
        assert np.linalg.norm(mean - m1_continued(m, c, z), 2) <= 1e-6


def test_v1_zero_argument():
    m, c = scalar()
    assert np.allclose(eval_V1_operator(m, c, np.zeros((1, 1))), 0, atol=1e-15)


def test_v1_scalar_collapses_to_transfer():
    m, c = scalar()
    y = 2.1 + 0.05j
    v = eval_V1_operator(m, c, np.array([[y]]))
    assert v[0, 0] == pytest.approx(m1_continued(m, c, y)[0, 0] - 2.0 + y, abs=1e-15)


def test_v1_norm_estimate():
    m, c = matrix(0, n=4)
    rng = np.random.default_rng(9)
    for _ in range(5):
        U = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))[0]
        Y = U @ np.diag(rng.uniform(2.0, 3.0, 4)) @ U.conj().T
        v = eval_V1_operator(m, c, Y)
        assert np.linalg.norm(v, 2) <= v1_norm_bound(m, c, Y)


def test_v1_separation_enforced():
    m, c = scalar()
    with pytest.raises(SpectrumMeetsContour):
        eval_V1_operator(m, c, np.array([[c.arc(1.2)]]))


def test_schroedinger_jump_and_symmetry():
    m, c = schroedinger()
    rng = np.random.default_rng(10)
    for z in _between(c, rng, 6):
        jump = 2j * math.pi * z * eval_density(m, z)
        diff = m1_continued(m, c, z) - eval_M1_physical(m, z).value - jump
        assert np.linalg.norm(diff, 2) <= 2 * c.tol_quad
    mc = c.mirrored()
    z = 2.0 + 0.2j
    assert np.linalg.norm(m1_continued(m, c, z).conj().T - m1_continued(m, mc, np.conj(z)), 2) <= 2 * c.tol_quad


def test_physical_close_to_cut():
    # poles within a panel width of the real axis get a graded local rule;
    # for Im z > 0 the lower-sheet continuation equals the physical value
    m, c = matrix(0, n=4)
    low = c.mirrored()
    for z in (1.0339 + 0.0089j, 2.5 + 1e-4j, 4.1695 + 0.0095j):
        ref = m1_continued(m, low, z)
        assert np.linalg.norm(eval_M1_physical(m, z).value - ref, 2) <= 2 * c.tol_quad
