import numpy as np
import pytest

from builders import matrix, scalar, zero
from resfact.contour import build_contour
from resfact.errors import BadResidueContour, CircleNotIsolating
from resfact.factorization import (Circle, adjoint_relation_residual, adjoint_spectrum_gap,
                                   compute_Omega, default_loops, eigenprojection_residues, eval_W1,
                                   factorization_residual, omega_identities, region_samples,
                                   solve_pair, w1_inverse_check)


def _samples(c, rng, count):
    out = []
    while len(out) < count:
        z = complex(rng.uniform(0.5, 5.0), rng.uniform(-1.5, 1.5))
        if not c.too_close(z) and not c.mirrored().too_close(z):
            out.append(z)
    return out


def test_zero_density():
    m, c = zero()
    pair = solve_pair(m, c)
    A = m.tilde_a1()
    assert np.array_equal(eval_W1(m, c, pair.H, 1.7 + 0.4j), np.eye(2))
    assert np.all(pair.Omega == 0)
    res = omega_identities(m, c, pair)
    assert res["m_omega"] <= 1e-13 and res["h_omega_right"] <= 1e-13
    ep = eigenprojection_residues(m, c, pair, 2.0)
    P = ep["residue"]
    # orthogonal projection onto the first channel
    assert np.allclose(P, np.diag([1.0, 0.0]), atol=1e-13)
    assert np.allclose(P, P.conj().T, atol=1e-13)
    assert np.array_equal(pair.H, A)


def test_factorization_at_origin():
    # M1(0) = tilde_a1, so W1(0) H1 must reproduce it
    m, c = matrix(0, n=3)
    pair = solve_pair(m, c, tol=1e-12)
    W0 = eval_W1(m, c, pair.H, 0.0)
    assert np.linalg.norm(W0 @ pair.H - m.tilde_a1(), 2) <= 1e-8


@pytest.mark.parametrize("build", [scalar, lambda: matrix(0, n=4), lambda: matrix(5, n=3)])
def test_factorization(build):
    m, c = build()
    pair = solve_pair(m, c, tol=1e-12)
    rng = np.random.default_rng(11)
    assert factorization_residual(m, c, pair.report, _samples(c, rng, 20)) <= 1e-6


@pytest.mark.parametrize("build", [scalar, lambda: matrix(0, n=4)])
def test_omega_properties(build):
    m, c = build()
    pair = solve_pair(m, c, tol=1e-12)
    res = omega_identities(m, c, pair)
    assert res["omega_norm"] < 1
    assert res["omega_adjoint"] <= 1e-8
    for k in ("m_omega", "h_omega_left", "h_omega_right", "similarity"):
        assert res[k] <= 1e-6, k
    # Omega does not depend on the contour beyond quadrature error
    other = build_contour(m, height=0.22, re_entry=c.re_entry + 0.4)
    pb = solve_pair(m, other, tol=1e-12)
    assert np.linalg.norm(pb.Omega - pair.Omega, 2) <= 2 * max(c.tol_quad, other.tol_quad) + 1e-10


def test_scalar_residue_is_inverse_of_one_plus_omega():
    m, c = scalar()
    pair = solve_pair(m, c, tol=1e-12)
    lam = pair.H[0, 0]
    ep = eigenprojection_residues(m, c, pair, lam)
    assert abs(ep["riesz"][0, 0] - 1) <= 1e-12
    assert abs(ep["residue"][0, 0] - 1 / (1 + pair.Omega[0, 0])) <= 1e-8


def test_matrix_eigenprojections():
    m, c = matrix(0, n=4)
    pair = solve_pair(m, c, tol=1e-12)
    for lam in np.linalg.eigvals(pair.H):
        ep = eigenprojection_residues(m, c, pair, lam)
        assert ep["residue_pp_left"] <= 1e-6
        assert ep["residue_pp_right"] <= 1e-6
        assert ep["idempotency"] <= 1e-10 and ep["commutator"] <= 1e-10
        assert abs(ep["trace"] - 1) <= 1e-10


def test_residue_contour_errors():
    m, c = matrix(1, n=3)
    pair = solve_pair(m, c)
    lam = np.linalg.eigvals(pair.H)
    with pytest.raises(CircleNotIsolating):
        eigenprojection_residues(m, c, pair, lam[0], radius=10.0)
    far = [Circle(complex(lam[0]) + 0.9 * pair.region_radius, 1e-3)]
    with pytest.raises(BadResidueContour):
        omega_identities(m, c, pair, loops=far)
    # two copies of the same loops enclose every eigenvalue twice
    with pytest.raises(BadResidueContour):
        omega_identities(m, c, pair, loops=default_loops(pair) * 2)


@pytest.mark.parametrize("build", [scalar, lambda: matrix(2, n=4)])
def test_adjoint_relation(build):
    m, c = build()
    pair = solve_pair(m, c, tol=1e-12)
    rng = np.random.default_rng(12)
    assert adjoint_relation_residual(m, c, pair.mirror, pair, _samples(c, rng, 20)) <= 1e-6
    assert adjoint_spectrum_gap(pair) <= 1e-8


def test_omega_mirror_is_adjoint():
    m, c = matrix(3, n=3)
    pair = solve_pair(m, c, tol=1e-12)
    direct = compute_Omega(m, pair.mirror, pair.H_mirror, pair.H)
    assert np.linalg.norm(direct - pair.Omega.conj().T, 2) <= 1e-8


@pytest.mark.parametrize("build", [scalar, lambda: matrix(4, n=4)])
def test_w1_inverse_bound(build):
    m, c = build()
    pair = solve_pair(m, c)
    rng = np.random.default_rng(13)
    zs = [z for z in region_samples(m, pair.region_radius, 60, rng) if not c.too_close(z)]
    worst_inv, worst_dev, bound = w1_inverse_check(m, c, pair, zs)
    assert worst_dev < 1
    assert worst_inv <= 1.05 * bound
