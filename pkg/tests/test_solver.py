import numpy as np
import pytest

from builders import SCALAR_ROOT, matrix, scalar, zero
from resfact.contour import build_contour
from resfact.errors import NotAdmissible
from resfact.linalg import match_multisets
from resfact.solver import solve_basic_equation, spectrum_H1, verify_contour_independence
from resfact.transfer import m1_continued


def test_zero_density_converges_at_once():
    m, c = zero()
    rep = solve_basic_equation(m, c)
    assert rep.iterations == 1
    assert np.all(rep.X == 0)
    assert np.array_equal(rep.H1, m.tilde_a1())
    assert rep.certified


def test_scalar_root():
    m, c = scalar()
    rep = solve_basic_equation(m, c, tol=1e-12)
    z = rep.H1[0, 0]
    assert abs(z - SCALAR_ROOT) <= 1e-8
    assert abs(m1_continued(m, c, z)[0, 0]) <= 10 * rep.tol
    assert rep.certified


def test_inadmissible_coupling():
    m, c = scalar()
    big = m.scaled(60.0)
    bc = build_contour(big, height=0.3, re_entry=3.0)
    with pytest.raises(NotAdmissible):
        solve_basic_equation(big, bc)


def test_noncertified_override():
    m, c = scalar()
    big = m.scaled(6.0)
    bc = build_contour(big, height=0.3, re_entry=3.0)
    try:
        rep = solve_basic_equation(big, bc, allow_noncertified=True)
    except Exception as exc:  # the iteration is allowed to fail outright
        assert type(exc).__name__ in ("NoConvergence", "SpectrumMeetsContour", "NearContour")
    else:
        assert rep.certified == rep.admissibility.admissible


def test_contour_independence_scalar():
    m, _ = scalar()
    a = build_contour(m, height=0.2, re_entry=3.0)
    b = build_contour(m, height=0.4, re_entry=3.0)
    assert verify_contour_independence(m, a, b, tol=1e-12) <= 1e-7


def test_contour_independence_matrix():
    m, c = matrix(0, n=4)
    other = build_contour(m, height=0.25, re_entry=c.re_entry + 0.3)
    assert verify_contour_independence(m, c, other, tol=1e-12) <= 1e-6


def test_spectrum_properties():
    for seed in range(3):
        m, c = matrix(seed, n=4)
        rep = solve_basic_equation(m, c)
        down = solve_basic_equation(m, c.mirrored())
        up = [lam for lam, _, _ in spectrum_H1(rep)]
        lo = [lam for lam, _, _ in spectrum_H1(down)]
        assert all(lam.imag > 0 for lam in up)
        assert match_multisets(np.conj(lo), up) <= 1e-8
        for lam in up:
            assert min(abs(np.conj(lo) - lam)) <= 1e-8
        # eigenvalues stay within r_min of the unperturbed spectrum
        r_min = rep.admissibility.r_min
        for lam in up:
            assert np.min(np.abs(m.spectrum_tilde_a1 - lam)) <= r_min


def test_eigenvectors_are_null_vectors():
    m, c = matrix(1, n=4)
    rep = solve_basic_equation(m, c, tol=1e-12)
    for lam, v, res in spectrum_H1(rep):
        assert res <= 1e-12
        assert np.linalg.norm(m1_continued(m, c, lam) @ v) <= 1e-9


def test_iteration_behaviour():
    m, c = matrix(2, n=4)
    rep = solve_basic_equation(m, c, tol=1e-12)
    h = rep.residual_history
    assert rep.contraction_estimate < 1
    assert all(b < a for a, b in zip(h[1:], h[2:]) if a > 1e-13)
    # the iterates stay in the ball of radius r_min
    assert rep.max_iterate_norm <= rep.admissibility.r_min * (1 + 1e-12)
    assert rep.certificate <= 10 * rep.tol and rep.certified
    d = rep.to_dict()
    assert d["iterations"] == rep.iterations and len(d["H1"]["re"]) == 4
